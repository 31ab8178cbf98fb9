//! Spin operators, basis states and singlet/triplet projectors.
//!
//! The product basis is ordered electron 1 ⊗ electron 2 ⊗ nucleus 1 ⊗ … with
//! each factor in descending-m order (|↑⟩ before |↓⟩, m = I first for a nucleus).
//! The leftmost factor is the slowest-varying index of the full matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex square matrix over the spin space.
pub type Operator = DMatrix<C64>;

/// Largest spin supported for a nucleus.
pub const MAX_SPIN: f64 = 2.5;

const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// A spin quantum number stored as twice its value, so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinQuantum(u32);

impl SpinQuantum {
    pub const HALF: SpinQuantum = SpinQuantum(1);

    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !value.is_finite() || value < 0.0 || (twice - twice.round()).abs() > 1e-9 {
            return Err(Error::InvalidSpin(value));
        }
        if value > MAX_SPIN + 1e-9 {
            return Err(Error::InvalidSpin(value));
        }
        Ok(SpinQuantum(twice.round() as u32))
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// Number of Zeeman sublevels, 2I + 1.
    pub fn multiplicity(self) -> usize {
        self.0 as usize + 1
    }

    /// Magnetic quantum numbers in basis order (m = I, I − 1, …, −I).
    pub fn m_values(self) -> impl Iterator<Item = f64> {
        let i = self.value();
        (0..self.multiplicity()).map(move |k| i - k as f64)
    }
}

/// Two electrons plus an ordered list of nuclear spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpinSystemRepr", into = "SpinSystemRepr")]
pub struct SpinSystem {
    nuclei: Vec<SpinQuantum>,
}

#[derive(Serialize, Deserialize)]
struct SpinSystemRepr {
    #[serde(default)]
    nuclear_spins: Vec<f64>,
}

impl TryFrom<SpinSystemRepr> for SpinSystem {
    type Error = Error;
    fn try_from(r: SpinSystemRepr) -> Result<Self> {
        SpinSystem::new(&r.nuclear_spins)
    }
}

impl From<SpinSystem> for SpinSystemRepr {
    fn from(s: SpinSystem) -> Self {
        SpinSystemRepr { nuclear_spins: s.nuclei.iter().map(|n| n.value()).collect() }
    }
}

/// A tensor factor of the spin space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site {
    Electron1,
    Electron2,
    /// Zero-based index into the nuclear list.
    Nucleus(usize),
}

impl SpinSystem {
    pub fn new(nuclear_spins: &[f64]) -> Result<Self> {
        let nuclei = nuclear_spins.iter().map(|&i| SpinQuantum::new(i)).collect::<Result<_>>()?;
        Ok(SpinSystem { nuclei })
    }

    /// The bare electron pair.
    pub fn electrons_only() -> Self {
        SpinSystem { nuclei: Vec::new() }
    }

    pub fn nuclei(&self) -> &[SpinQuantum] {
        &self.nuclei
    }

    /// Dimension of the nuclear factor, Π(2I_k + 1).
    pub fn nuclear_dim(&self) -> usize {
        self.nuclei.iter().map(|n| n.multiplicity()).product()
    }

    /// Full Hilbert-space dimension, 4n.
    pub fn dim(&self) -> usize {
        4 * self.nuclear_dim()
    }

    fn factor_dims(&self) -> Vec<usize> {
        let mut dims = vec![2, 2];
        dims.extend(self.nuclei.iter().map(|n| n.multiplicity()));
        dims
    }

    fn factor_index(&self, site: Site) -> Result<usize> {
        match site {
            Site::Electron1 => Ok(0),
            Site::Electron2 => Ok(1),
            Site::Nucleus(k) if k < self.nuclei.len() => Ok(2 + k),
            Site::Nucleus(k) => Err(Error::IndexOutOfRange {
                what: "nucleus",
                index: k,
                len: self.nuclei.len(),
            }),
        }
    }
}

pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

/// Kronecker product with the left factor outermost.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Angular-momentum matrices (Sx, Sy, Sz) for spin `spin` in the descending-m basis.
pub fn spin_operators(spin: SpinQuantum) -> (Operator, Operator, Operator) {
    let dim = spin.multiplicity();
    let s = spin.value();
    let m: Vec<f64> = spin.m_values().collect();
    // S+ |m⟩ = sqrt(s(s+1) − m(m+1)) |m+1⟩; row k−1 holds m+1.
    let mut plus = Operator::zeros(dim, dim);
    for k in 1..dim {
        let mk = m[k];
        plus[(k - 1, k)] = C64::new((s * (s + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    let sx = (&plus + &minus) * C64::new(0.5, 0.0);
    let sy = (&plus - &minus) * C64::new(0.0, -0.5);
    let sz = Operator::from_diagonal(&nalgebra::DVector::from_iterator(
        dim,
        m.iter().map(|&v| C64::new(v, 0.0)),
    ));
    (sx, sy, sz)
}

/// Lift a single-factor operator to the full space (identity on all other factors).
pub fn embed(site: Site, op: &Operator, system: &SpinSystem) -> Result<Operator> {
    let dims = system.factor_dims();
    let idx = system.factor_index(site)?;
    if op.nrows() != dims[idx] || op.ncols() != dims[idx] {
        return Err(Error::DimensionMismatch { expected: dims[idx], found: op.nrows() });
    }
    let left: usize = dims[..idx].iter().product();
    let right: usize = dims[idx + 1..].iter().product();
    Ok(kron(&kron(&identity(left), op), &identity(right)))
}

/// Vector spin operator of one site embedded in the full space.
pub fn site_vector(site: Site, system: &SpinSystem) -> Result<[Operator; 3]> {
    let spin = match site {
        Site::Electron1 | Site::Electron2 => SpinQuantum::HALF,
        Site::Nucleus(k) => *system.nuclei.get(k).ok_or(Error::IndexOutOfRange {
            what: "nucleus",
            index: k,
            len: system.nuclei.len(),
        })?,
    };
    let (x, y, z) = spin_operators(spin);
    Ok([embed(site, &x, system)?, embed(site, &y, system)?, embed(site, &z, system)?])
}

/// Scalar product a·b of two embedded vector operators.
pub fn dot(a: &[Operator; 3], b: &[Operator; 3]) -> Operator {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

/// s₁·s₂ over the full space.
pub fn electron_exchange(system: &SpinSystem) -> Operator {
    let s1 = site_vector(Site::Electron1, system).expect("electron sites always exist");
    let s2 = site_vector(Site::Electron2, system).expect("electron sites always exist");
    dot(&s1, &s2)
}

/// Q_S = 1/4 − s₁·s₂.
pub fn singlet_projector(system: &SpinSystem) -> Operator {
    identity(system.dim()) * C64::new(0.25, 0.0) - electron_exchange(system)
}

/// Q_T = 3/4 + s₁·s₂.
pub fn triplet_projector(system: &SpinSystem) -> Operator {
    identity(system.dim()) * C64::new(0.75, 0.0) + electron_exchange(system)
}

/// The pair of complementary projectors, built once per system.
#[derive(Debug, Clone)]
pub struct Projectors {
    pub singlet: Operator,
    pub triplet: Operator,
}

impl Projectors {
    pub fn new(system: &SpinSystem) -> Self {
        Projectors { singlet: singlet_projector(system), triplet: triplet_projector(system) }
    }

    pub fn dim(&self) -> usize {
        self.singlet.nrows()
    }
}

/// Hermitian, trace ≤ 1 density operator. The trace is the surviving pair fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(Operator);

impl DensityOperator {
    /// Wraps a matrix without checking positivity; only squareness is enforced.
    pub fn from_matrix(m: Operator) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        Ok(DensityOperator(m))
    }

    pub fn pure(state: &nalgebra::DVector<C64>) -> Self {
        DensityOperator(state * state.adjoint())
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn into_matrix(self) -> Operator {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Largest |ρ − ρ†| entry.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }
}

pub fn hermiticity_defect(m: &Operator) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue(m: &Operator) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// (m + m†)/2
pub fn hermitize(m: &Operator) -> Operator {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Electron-pair states in the |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩ basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectronState {
    Singlet,
    TripletZero,
    TripletPlus,
    TripletMinus,
    /// Product state with each electron up (`true`) or down.
    Product(bool, bool),
}

impl ElectronState {
    pub fn amplitudes(self) -> [C64; 4] {
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            ElectronState::Singlet => [ZERO, r, -r, ZERO],
            ElectronState::TripletZero => [ZERO, r, r, ZERO],
            ElectronState::TripletPlus => [ONE, ZERO, ZERO, ZERO],
            ElectronState::TripletMinus => [ZERO, ZERO, ZERO, ONE],
            ElectronState::Product(a, b) => {
                let mut v = [ZERO; 4];
                v[usize::from(!a) * 2 + usize::from(!b)] = ONE;
                v
            }
        }
    }
}

fn parse_sign(c: char) -> Option<bool> {
    match c {
        '+' | '↑' | 'u' => Some(true),
        '-' | '−' | '↓' | 'd' => Some(false),
        _ => None,
    }
}

/// Parse a basis label into a normalized state vector.
///
/// Accepted forms:
/// - `S`, `T0`, `T+`, `T-` for the bare electron pair;
/// - the same followed by `|` and a nuclear part, e.g. `S|+` or `T0|1,-1/2`;
/// - a product label of `+`/`-` characters, electrons first, e.g. `++-`
///   (only when every nucleus is spin-1/2).
///
/// Nuclear parts are either a string of `+`/`-` (spin-1/2 nuclei) or a
/// comma-separated list of m values.
pub fn basis_vector(label: &str, system: &SpinSystem) -> Result<nalgebra::DVector<C64>> {
    let label = label.trim();
    let bad = || Error::UnknownLabel(label.to_string());
    let (electron_part, nuclear_part) = match label.split_once('|') {
        Some((e, n)) => (e.trim(), Some(n.trim())),
        None => (label, None),
    };

    let named = match electron_part {
        "S" => Some(ElectronState::Singlet),
        "T0" | "T" => Some(ElectronState::TripletZero),
        "T+" => Some(ElectronState::TripletPlus),
        "T-" | "T−" => Some(ElectronState::TripletMinus),
        _ => None,
    };

    let (electron, nuclear_label): (ElectronState, Option<String>) = match named {
        Some(e) => (e, nuclear_part.map(str::to_string)),
        None => {
            let chars: Vec<char> = electron_part.chars().collect();
            if chars.len() < 2 || nuclear_part.is_some() {
                return Err(bad());
            }
            let a = parse_sign(chars[0]).ok_or_else(bad)?;
            let b = parse_sign(chars[1]).ok_or_else(bad)?;
            let rest: String = chars[2..].iter().collect();
            let rest = if rest.is_empty() && system.nuclei.is_empty() { None } else { Some(rest) };
            (ElectronState::Product(a, b), rest)
        }
    };

    let nuclear = nuclear_vector(nuclear_label.as_deref(), system, label)?;
    let e = nalgebra::DVector::from_row_slice(&electron.amplitudes());
    Ok(e.kronecker(&nuclear))
}

fn nuclear_vector(
    part: Option<&str>,
    system: &SpinSystem,
    label: &str,
) -> Result<nalgebra::DVector<C64>> {
    let bad = || Error::UnknownLabel(label.to_string());
    let nuclei = system.nuclei();
    let ms: Vec<f64> = match part {
        None if nuclei.is_empty() => Vec::new(),
        None => return Err(Error::MissingNuclearState(label.to_string())),
        Some(p) if p.contains(',') || p.chars().any(|c| c.is_ascii_digit()) => p
            .split(',')
            .map(|tok| parse_m(tok.trim()).ok_or_else(bad))
            .collect::<Result<_>>()?,
        Some(p) => p
            .chars()
            .map(|c| parse_sign(c).map(|up| if up { 0.5 } else { -0.5 }).ok_or_else(bad))
            .collect::<Result<_>>()?,
    };
    if ms.len() != nuclei.len() {
        return Err(bad());
    }
    let mut v = nalgebra::DVector::from_element(1, ONE);
    for (spin, m) in nuclei.iter().zip(&ms) {
        let pos = spin.m_values().position(|x| (x - m).abs() < 1e-9).ok_or_else(bad)?;
        let mut f = nalgebra::DVector::from_element(spin.multiplicity(), ZERO);
        f[pos] = ONE;
        v = v.kronecker(&f);
    }
    Ok(v)
}

fn parse_m(tok: &str) -> Option<f64> {
    let tok = tok.replace('−', "-");
    if let Some((n, d)) = tok.split_once('/') {
        let n: f64 = n.trim().parse().ok()?;
        let d: f64 = d.trim().parse().ok()?;
        (d != 0.0).then(|| n / d)
    } else {
        tok.trim().parse().ok()
    }
}

/// Pure density operator for a basis label.
pub fn basis_state(label: &str, system: &SpinSystem) -> Result<DensityOperator> {
    Ok(DensityOperator::pure(&basis_vector(label, system)?))
}

/// Normalization tolerance for user-supplied amplitudes.
pub const AMPLITUDE_TOLERANCE: f64 = 1e-9;

/// Pure state Σ c_k |label_k⟩; the amplitudes must already be normalized.
pub fn superposition(terms: &[(String, C64)], system: &SpinSystem) -> Result<DensityOperator> {
    if terms.is_empty() {
        return Err(Error::NotNormalized(0.0));
    }
    let mut psi = nalgebra::DVector::from_element(system.dim(), ZERO);
    for (label, c) in terms {
        psi += basis_vector(label, system)? * *c;
    }
    let norm2 = psi.norm_squared();
    if (norm2 - 1.0).abs() > AMPLITUDE_TOLERANCE {
        return Err(Error::NotNormalized(norm2));
    }
    Ok(DensityOperator::pure(&psi))
}

/// α|S⟩ + β|T₀⟩ on the bare electron pair.
pub fn coherent_pair(alpha: C64, beta: C64) -> Result<DensityOperator> {
    superposition(
        &[("S".to_string(), alpha), ("T0".to_string(), beta)],
        &SpinSystem::electrons_only(),
    )
}

/// Convex combination Σ w_k ρ_k; weights must be non-negative and sum to 1.
pub fn mixture(components: &[(f64, DensityOperator)]) -> Result<DensityOperator> {
    let total: f64 = components.iter().map(|(w, _)| *w).sum();
    if components.is_empty()
        || components.iter().any(|(w, _)| *w < 0.0)
        || (total - 1.0).abs() > AMPLITUDE_TOLERANCE
    {
        return Err(Error::NotNormalized(total));
    }
    let dim = components[0].1.dim();
    let mut acc = Operator::zeros(dim, dim);
    for (w, rho) in components {
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: rho.dim() });
        }
        acc += rho.matrix() * C64::new(*w, 0.0);
    }
    Ok(DensityOperator(acc))
}
