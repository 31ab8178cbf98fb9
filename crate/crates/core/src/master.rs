//! Evolution laws for the radical-pair density matrix.
//!
//! Four theories are provided:
//!
//! - **traditional**: dρ/dt = −i[𝓗,ρ] − (k_S/2){Q_S,ρ} − (k_T/2){Q_T,ρ}
//! - **Jones–Hore**: dρ/dt = −i[𝓗,ρ] − Σ_X k_X (ρQ_X + Q_Xρ − Q_XρQ_X)
//! - **`KominisPair`**: trace-preserving singlet–triplet decoherence of a
//!   unit-trace state, dρ/dt = −i[𝓗,ρ] − ((k_S+k_T)/2)(ρQ_S + Q_Sρ − 2Q_SρQ_S),
//!   with the pair count carried separately by dN/N = −(k_S⟨Q_S⟩ + k_T⟨Q_T⟩)
//! - **general**: the decoherence term plus reaction removal interpolated by
//!   the singlet–triplet coherence p_coh,
//!   dρ/dt = dρ_nr/dt − (1−p_coh)(k_S Q_SρQ_S + k_T Q_TρQ_T)
//!           − p_coh (k_S Tr{Q_Sρ} + k_T Tr{Q_Tρ}) ρ/Tr{ρ}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::{Operator, Projectors, C64};

/// Below this trace ρ/Tr{ρ} is treated as undefined and reaction terms are dropped.
pub const TRACE_FLOOR: f64 = 1e-9;

/// Excess over 1 that `coherence_measure` silently clamps.
pub const COHERENCE_CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryKind {
    Traditional,
    JonesHore,
    KominisPair,
    General,
}

impl TheoryKind {
    pub const ALL: [TheoryKind; 4] =
        [TheoryKind::Traditional, TheoryKind::JonesHore, TheoryKind::KominisPair, TheoryKind::General];

    pub fn name(self) -> &'static str {
        match self {
            TheoryKind::Traditional => "traditional",
            TheoryKind::JonesHore => "jones-hore",
            TheoryKind::KominisPair => "kominis-pair",
            TheoryKind::General => "general",
        }
    }
}

impl fmt::Display for TheoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TheoryKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown theory `{s}`")))
    }
}

/// Recombination rates (1/time).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub k_s: f64,
    pub k_t: f64,
}

impl RateSpec {
    pub fn new(k_s: f64, k_t: f64) -> Result<Self> {
        let r = RateSpec { k_s, k_t };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_s >= 0.0 && self.k_t >= 0.0) || !self.k_s.is_finite() || !self.k_t.is_finite() {
            return Err(Error::Config(format!(
                "rates must be finite and non-negative (k_s = {}, k_t = {})",
                self.k_s, self.k_t
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.k_s + self.k_t
    }

    pub fn max(&self) -> f64 {
        self.k_s.max(self.k_t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceMode {
    /// Tr{ρ_STρ_TS} / (Tr{ρ_SS} Tr{ρ_TT}).
    Raw,
    /// Coherence term divided by Tr{ρ²} and block populations by Tr{ρ}, so
    /// mixedness of spectator nuclei does not masquerade as electron decoherence.
    #[default]
    Normalized,
}

impl FromStr for CoherenceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(CoherenceMode::Raw),
            "normalized" => Ok(CoherenceMode::Normalized),
            _ => Err(Error::Config(format!("unknown coherence mode `{s}`"))),
        }
    }
}

/// Singlet/triplet blocks of ρ. The four blocks sum back to ρ.
#[derive(Debug, Clone)]
pub struct BlockDecomposition {
    pub ss: Operator,
    pub tt: Operator,
    pub st: Operator,
    pub ts: Operator,
}

impl BlockDecomposition {
    pub fn incoherent(&self) -> Operator {
        &self.ss + &self.tt
    }

    pub fn coherent(&self) -> Operator {
        &self.st + &self.ts
    }

    pub fn reassemble(&self) -> Operator {
        &self.ss + &self.tt + &self.st + &self.ts
    }
}

pub fn decompose(rho: &Operator, p: &Projectors) -> BlockDecomposition {
    let qs_rho = &p.singlet * rho;
    let qt_rho = &p.triplet * rho;
    BlockDecomposition {
        ss: &qs_rho * &p.singlet,
        st: &qs_rho * &p.triplet,
        ts: &qt_rho * &p.singlet,
        tt: &qt_rho * &p.triplet,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceStatus {
    Regular,
    /// Exceeded 1 and was clamped.
    Clamped,
    /// A singlet or triplet block is empty; reported as zero.
    EmptyBlock,
    /// Trace at or below the floor; reported as zero.
    Depleted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub value: f64,
    pub status: CoherenceStatus,
}

impl Coherence {
    fn zero(status: CoherenceStatus) -> Self {
        Coherence { value: 0.0, status }
    }
}

fn trace_product(a: &Operator, b: &Operator) -> C64 {
    // Tr{AB} without forming the product.
    let n = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Unclamped ratio; `None` status means the value came from the formula.
fn coherence_ratio(rho: &Operator, p: &Projectors, mode: CoherenceMode) -> (f64, Option<CoherenceStatus>) {
    let trace = rho.trace().re;
    if trace <= TRACE_FLOOR {
        return (0.0, Some(CoherenceStatus::Depleted));
    }
    let qs_rho = &p.singlet * rho;
    let qt_rho = &p.triplet * rho;
    let ss = qs_rho.trace().re;
    let tt = qt_rho.trace().re;
    if ss <= 0.0 || tt <= 0.0 {
        return (0.0, Some(CoherenceStatus::EmptyBlock));
    }
    // Tr{ρ_ST ρ_TS} = Tr{Q_Sρ Q_Tρ} by cyclicity and idempotence.
    let cross = trace_product(&qs_rho, &qt_rho).re;
    let value = match mode {
        CoherenceMode::Raw => cross / (ss * tt),
        CoherenceMode::Normalized => {
            let purity = trace_product(rho, rho).re;
            (cross / purity) / ((ss / trace) * (tt / trace))
        }
    };
    (value, None)
}

/// Singlet–triplet coherence p_coh ∈ [0, 1].
///
/// Values above 1 by less than [`COHERENCE_CLAMP_TOLERANCE`] are clamped;
/// a larger excess means `rho` is not a valid state and is an error.
pub fn coherence_measure(rho: &Operator, p: &Projectors, mode: CoherenceMode) -> Result<Coherence> {
    let c = coherence_measure_clamped(rho, p, mode);
    match c.excess {
        Some(v) if v > 1.0 + COHERENCE_CLAMP_TOLERANCE => Err(Error::CoherenceOutOfRange(v)),
        _ => Ok(c.coherence),
    }
}

/// Coherence clamped to [0, 1] regardless of excess, with the unclamped value kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedCoherence {
    pub coherence: Coherence,
    /// The raw value when it exceeded 1.
    pub excess: Option<f64>,
}

/// Lenient variant for intermediate integrator stages, whose states are
/// only positive up to truncation error; nearly empty blocks then make the
/// ratio ill-conditioned.
pub fn coherence_measure_clamped(rho: &Operator, p: &Projectors, mode: CoherenceMode) -> ClampedCoherence {
    let (value, status) = coherence_ratio(rho, p, mode);
    if let Some(status) = status {
        return ClampedCoherence { coherence: Coherence::zero(status), excess: None };
    }
    if value > 1.0 {
        return ClampedCoherence {
            coherence: Coherence { value: 1.0, status: CoherenceStatus::Clamped },
            excess: Some(value),
        };
    }
    ClampedCoherence { coherence: Coherence { value: value.max(0.0), status: CoherenceStatus::Regular }, excess: None }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const ONE: C64 = C64::new(1.0, 0.0);

/// d += a·x
pub(crate) fn axpy(d: &mut Operator, a: C64, x: &Operator) {
    d.zip_apply(x, |dv, xv| *dv += a * xv);
}

fn is_zero(m: &Operator) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}

/// −i[𝓗, ρ]
pub fn unitary_term(rho: &Operator, h: &Operator) -> Operator {
    let mut d = Operator::zeros(rho.nrows(), rho.ncols());
    if !is_zero(h) {
        d.gemm(C64::new(0.0, -1.0), h, rho, ONE);
        d.gemm(C64::new(0.0, 1.0), rho, h, ONE);
    }
    d
}

pub fn rhs_traditional(rho: &Operator, h: &Operator, p: &Projectors, rates: &RateSpec) -> Operator {
    let mut d = unitary_term(rho, h);
    for (k, q) in [(rates.k_s, &p.singlet), (rates.k_t, &p.triplet)] {
        if k != 0.0 {
            d.gemm(real(-0.5 * k), rho, q, ONE);
            d.gemm(real(-0.5 * k), q, rho, ONE);
        }
    }
    d
}

pub fn rhs_jones_hore(rho: &Operator, h: &Operator, p: &Projectors, rates: &RateSpec) -> Operator {
    let mut d = unitary_term(rho, h);
    for (k, q) in [(rates.k_s, &p.singlet), (rates.k_t, &p.triplet)] {
        if k != 0.0 {
            let q_rho = q * rho;
            d.gemm(real(-k), rho, q, ONE);
            axpy(&mut d, real(-k), &q_rho);
            d.gemm(real(k), &q_rho, q, ONE);
        }
    }
    d
}

/// Decoherence of not-yet-reacted pairs. Traceless for every input.
pub fn rhs_kominis_nonreacted(rho: &Operator, h: &Operator, p: &Projectors, rates: &RateSpec) -> Operator {
    let mut d = unitary_term(rho, h);
    let k = rates.total();
    if k != 0.0 {
        let q = &p.singlet;
        let q_rho = q * rho;
        d.gemm(real(-0.5 * k), rho, q, ONE);
        axpy(&mut d, real(-0.5 * k), &q_rho);
        d.gemm(real(k), &q_rho, q, ONE);
    }
    d
}

/// dN/(N dt) = −(k_S⟨Q_S⟩ + k_T⟨Q_T⟩) for a unit-trace state.
pub fn kominis_number_derivative(rho_unit: &Operator, p: &Projectors, rates: &RateSpec) -> f64 {
    let (qs, qt) = populations(rho_unit, p);
    -(rates.k_s * qs + rates.k_t * qt)
}

/// (Tr{Q_Sρ}, Tr{Q_Tρ})
pub fn populations(rho: &Operator, p: &Projectors) -> (f64, f64) {
    (trace_product(&p.singlet, rho).re, trace_product(&p.triplet, rho).re)
}

#[derive(Debug, Clone)]
pub struct GeneralRhs {
    pub derivative: Operator,
    pub coherence: Coherence,
    /// Reaction terms were dropped because the trace fell below the floor.
    pub depleted: bool,
}

/// How the coherence weight entering the general equation is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoherenceWeight {
    /// Re-evaluated from the current state.
    Measured(CoherenceMode),
    /// Held at a fixed value in [0, 1].
    Fixed(f64),
}

pub fn rhs_general(
    rho: &Operator,
    h: &Operator,
    p: &Projectors,
    rates: &RateSpec,
    weight: CoherenceWeight,
) -> Result<GeneralRhs> {
    let mut d = rhs_kominis_nonreacted(rho, h, p, rates);
    let trace = rho.trace().re;
    let coherence = match weight {
        CoherenceWeight::Measured(mode) => coherence_measure_clamped(rho, p, mode).coherence,
        CoherenceWeight::Fixed(v) => Coherence { value: v, status: CoherenceStatus::Regular },
    };
    if trace <= TRACE_FLOOR {
        return Ok(GeneralRhs { derivative: d, coherence, depleted: true });
    }
    let pc = coherence.value;
    if pc < 1.0 {
        for (k, q) in [(rates.k_s, &p.singlet), (rates.k_t, &p.triplet)] {
            if k != 0.0 {
                let q_rho = q * rho;
                d.gemm(real(-(1.0 - pc) * k), &q_rho, q, ONE);
            }
        }
    }
    if pc > 0.0 {
        let (qs, qt) = populations(rho, p);
        let loss = rates.k_s * qs + rates.k_t * qt;
        axpy(&mut d, real(-pc * loss / trace), rho);
    }
    Ok(GeneralRhs { derivative: d, coherence, depleted: false })
}

/// A fully specified evolution law: theory, Hamiltonian, projectors and rates.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    pub theory: TheoryKind,
    pub hamiltonian: Operator,
    pub projectors: Projectors,
    pub rates: RateSpec,
    pub coherence_mode: CoherenceMode,
}

/// Time derivative of the integrated quantities.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub rho: Operator,
    /// d ln N/dt; nonzero only for the `KominisPair` formulation.
    pub number_rate: f64,
    pub singlet_yield: f64,
    pub triplet_yield: f64,
    pub depleted: bool,
}

impl MasterEquation {
    /// Evaluate the derivative of (ρ, N, Y_S, Y_T) given ρ and N.
    ///
    /// For the `KominisPair` formulation `rho` is the unit-trace single-pair
    /// state and `number` the surviving fraction; otherwise `number` is ignored.
    pub fn derivative(&self, rho: &Operator, number: f64) -> Result<StateDerivative> {
        let (h, p, r) = (&self.hamiltonian, &self.projectors, &self.rates);
        let (qs, qt) = populations(rho, p);
        let mut out = StateDerivative {
            rho: Operator::zeros(0, 0),
            number_rate: 0.0,
            singlet_yield: r.k_s * qs,
            triplet_yield: r.k_t * qt,
            depleted: false,
        };
        out.rho = match self.theory {
            TheoryKind::Traditional => rhs_traditional(rho, h, p, r),
            TheoryKind::JonesHore => rhs_jones_hore(rho, h, p, r),
            TheoryKind::KominisPair => {
                out.number_rate = kominis_number_derivative(rho, p, r);
                out.singlet_yield *= number;
                out.triplet_yield *= number;
                rhs_kominis_nonreacted(rho, h, p, r)
            }
            TheoryKind::General => {
                let g = rhs_general(rho, h, p, r, CoherenceWeight::Measured(self.coherence_mode))?;
                if g.depleted {
                    out.depleted = true;
                    out.singlet_yield = 0.0;
                    out.triplet_yield = 0.0;
                }
                g.derivative
            }
        };
        Ok(out)
    }
}
