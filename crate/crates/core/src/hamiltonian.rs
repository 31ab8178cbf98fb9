//! Magnetic Hamiltonian: exchange, isotropic hyperfine and Zeeman terms (ħ = 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{dot, electron_exchange, site_vector, Operator, Site, SpinSystem, C64};

/// Isotropic hyperfine coupling a s_e·I_k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineTerm {
    /// Electron carrying the coupling, 1 or 2.
    #[serde(default = "default_electron")]
    pub electron: usize,
    /// Zero-based nucleus index.
    pub nucleus: usize,
    pub coupling: f64,
}

fn default_electron() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    /// J in −J s₁·s₂.
    #[serde(default)]
    pub exchange_j: f64,
    #[serde(default)]
    pub hyperfine: Vec<HyperfineTerm>,
    /// Field times gyromagnetic factor for electron 1 and electron 2.
    #[serde(default)]
    pub zeeman: [f64; 2],
}

impl HamiltonianSpec {
    pub fn exchange_only(j: f64) -> Self {
        HamiltonianSpec { exchange_j: j, ..Default::default() }
    }

    pub fn is_zero(&self) -> bool {
        self.exchange_j == 0.0
            && self.zeeman == [0.0, 0.0]
            && self.hyperfine.iter().all(|h| h.coupling == 0.0)
    }

    /// Sum of two specs; hyperfine lists are concatenated.
    pub fn combined(&self, other: &HamiltonianSpec) -> HamiltonianSpec {
        let mut hyperfine = self.hyperfine.clone();
        hyperfine.extend_from_slice(&other.hyperfine);
        HamiltonianSpec {
            exchange_j: self.exchange_j + other.exchange_j,
            hyperfine,
            zeeman: [self.zeeman[0] + other.zeeman[0], self.zeeman[1] + other.zeeman[1]],
        }
    }

    pub fn validate(&self, system: &SpinSystem) -> Result<()> {
        for term in &self.hyperfine {
            electron_site(term.electron)?;
            if term.nucleus >= system.nuclei().len() {
                return Err(Error::IndexOutOfRange {
                    what: "nucleus",
                    index: term.nucleus,
                    len: system.nuclei().len(),
                });
            }
        }
        Ok(())
    }
}

fn electron_site(index: usize) -> Result<Site> {
    match index {
        1 => Ok(Site::Electron1),
        2 => Ok(Site::Electron2),
        _ => Err(Error::IndexOutOfRange { what: "electron (1-based)", index, len: 2 }),
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// 𝓗 = −J s₁·s₂ + Σ a_k s_e·I_k + B₁ s₁z + B₂ s₂z.
pub fn assemble(spec: &HamiltonianSpec, system: &SpinSystem) -> Result<Operator> {
    spec.validate(system)?;
    let dim = system.dim();
    let mut h = Operator::zeros(dim, dim);
    if spec.exchange_j != 0.0 {
        h -= electron_exchange(system) * real(spec.exchange_j);
    }
    for term in &spec.hyperfine {
        if term.coupling == 0.0 {
            continue;
        }
        let s = site_vector(electron_site(term.electron)?, system)?;
        let i = site_vector(Site::Nucleus(term.nucleus), system)?;
        h += dot(&s, &i) * real(term.coupling);
    }
    for (k, site) in [Site::Electron1, Site::Electron2].into_iter().enumerate() {
        if spec.zeeman[k] != 0.0 {
            let [_, _, sz] = site_vector(site, system)?;
            h += sz * real(spec.zeeman[k]);
        }
    }
    Ok(h)
}
