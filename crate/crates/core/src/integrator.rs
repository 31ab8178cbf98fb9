//! Fixed-step classical Runge–Kutta propagation with yield bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master::{MasterEquation, TheoryKind};
use crate::observables::{sample, EnergyReference, EnergyUnit, Physicality, TimeSeriesRecord};
use crate::spin::{hermiticity_defect, hermitize, DensityOperator, Operator, C64};

/// Step-size bound above which a stability warning is emitted.
pub const STABILITY_BOUND: f64 = 0.1;

/// Samples with a smaller eigenvalue produce a positivity warning.
pub const POSITIVITY_WARNING: f64 = -1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Step size; `None` picks 1e−3 / max(1, ‖𝓗‖₂, k_S, k_T).
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_max: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_true")]
    pub hermitize: bool,
}

fn default_sample_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_max: f64, sample_every: usize) -> Self {
        IntegratorConfig { dt: Some(dt), t_max, sample_every, hermitize: true }
    }

    /// The step size actually used for `eq`.
    pub fn resolve_dt(&self, eq: &MasterEquation) -> f64 {
        self.dt.unwrap_or_else(|| 1e-3 / stiffness_scale(eq).max(1.0))
    }

    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if !(self.t_max >= dt) {
            return Err(Error::Config(format!("t_max ({}) must be at least dt ({dt})", self.t_max)));
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of RK4 steps covering [0, t_max].
    pub fn steps(&self, dt: f64) -> usize {
        (self.t_max / dt + 1e-9).floor() as usize
    }

    /// Rows emitted by `evolve`: floor(t_max/(dt·sample_every)) + 1.
    pub fn sample_count(&self, dt: f64) -> usize {
        self.steps(dt) / self.sample_every + 1
    }
}

/// max(‖𝓗‖₂, k_S, k_T)
pub fn stiffness_scale(eq: &MasterEquation) -> f64 {
    spectral_norm(&eq.hamiltonian).max(eq.rates.max())
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub fn spectral_norm(h: &Operator) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    hermitize(h).symmetric_eigenvalues().iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Anything RK4 can advance: supports y + a·dy.
pub trait OdeState: Clone {
    fn add_scaled(&self, a: f64, d: &Self) -> Self;
}

impl OdeState for f64 {
    fn add_scaled(&self, a: f64, d: &Self) -> Self {
        self + a * d
    }
}

/// One classical RK4 step.
pub fn rk4_step<S, F>(y: &S, dt: f64, mut f: F) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S>,
{
    let k1 = f(y)?;
    let k2 = f(&y.add_scaled(0.5 * dt, &k1))?;
    let k3 = f(&y.add_scaled(0.5 * dt, &k2))?;
    let k4 = f(&y.add_scaled(dt, &k3))?;
    Ok(y.add_scaled(dt / 6.0, &k1)
        .add_scaled(dt / 3.0, &k2)
        .add_scaled(dt / 3.0, &k3)
        .add_scaled(dt / 6.0, &k4))
}

/// Integrated quantities: ρ (unit-trace single-pair state for
/// `KominisPair`), the pair count N, and cumulative yields.
#[derive(Debug, Clone)]
pub struct PairState {
    pub rho: Operator,
    pub number: f64,
    pub yield_s: f64,
    pub yield_t: f64,
}

impl OdeState for PairState {
    fn add_scaled(&self, a: f64, d: &Self) -> Self {
        let mut rho = self.rho.clone();
        crate::master::axpy(&mut rho, C64::new(a, 0.0), &d.rho);
        PairState {
            rho,
            number: self.number + a * d.number,
            yield_s: self.yield_s + a * d.yield_s,
            yield_t: self.yield_t + a * d.yield_t,
        }
    }
}

impl PairState {
    pub fn initial(rho0: &DensityOperator) -> Self {
        PairState { rho: rho0.matrix().clone(), number: 1.0, yield_s: 0.0, yield_t: 0.0 }
    }

    /// Ensemble density matrix whose trace is the surviving fraction.
    pub fn reported(&self, theory: TheoryKind) -> Operator {
        match theory {
            TheoryKind::KominisPair => &self.rho * C64::new(self.number, 0.0),
            _ => self.rho.clone(),
        }
    }

    fn is_finite(&self) -> bool {
        self.rho.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.number.is_finite()
            && self.yield_s.is_finite()
            && self.yield_t.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// dt·max(‖𝓗‖₂, k_S, k_T) exceeds the stability bound.
    LargeStep { product: f64 },
    /// Sampled state has an eigenvalue below the warning threshold.
    Positivity { t: f64, min_eigenvalue: f64 },
    /// The trace fell below the floor and reaction terms were switched off.
    Depleted { t: f64 },
    /// Sampled p_coh exceeded 1 beyond the clamp tolerance and was clamped;
    /// `t` is the first such sample and `value` the largest excess value.
    CoherenceClamped { t: f64, value: f64, count: usize },
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub theory: TheoryKind,
    pub dt: f64,
    pub steps: usize,
    pub records: Vec<TimeSeriesRecord>,
    /// One entry per record; the Hermiticity defect is measured before symmetrization.
    pub physicality: Vec<Physicality>,
    pub warnings: Vec<Warning>,
    pub final_state: PairState,
}

impl Evolution {
    pub fn last(&self) -> &TimeSeriesRecord {
        self.records.last().expect("evolve always records t = 0")
    }

    pub fn final_density(&self) -> Operator {
        self.final_state.reported(self.theory)
    }

    pub fn max_closure_defect(&self) -> f64 {
        self.records.iter().map(TimeSeriesRecord::closure_defect).fold(0.0, f64::max)
    }

    pub fn max_abs_delta_e_times_t(&self) -> f64 {
        self.records.iter().map(|r| r.delta_e_times_t.abs()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.physicality.iter().map(|p| p.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        self.physicality.iter().map(|p| p.hermiticity_defect).fold(0.0, f64::max)
    }

    pub fn depleted(&self) -> bool {
        self.warnings.iter().any(|w| matches!(w, Warning::Depleted { .. }))
    }
}

/// Propagate `rho0` under `eq`, sampling observables every `sample_every` steps.
pub fn evolve(
    rho0: &DensityOperator,
    eq: &MasterEquation,
    config: &IntegratorConfig,
    unit: EnergyUnit,
) -> Result<Evolution> {
    let dt = config.resolve_dt(eq);
    config.validate(dt)?;
    if rho0.dim() != eq.projectors.dim() {
        return Err(Error::DimensionMismatch { expected: eq.projectors.dim(), found: rho0.dim() });
    }
    let energy = EnergyReference::new(rho0.matrix(), &eq.hamiltonian, unit)?;
    let steps = config.steps(dt);

    let mut warnings = Vec::new();
    let product = dt * stiffness_scale(eq);
    if product > STABILITY_BOUND {
        warnings.push(Warning::LargeStep { product });
    }

    let mut records = Vec::with_capacity(config.sample_count(dt));
    let mut physicality = Vec::with_capacity(config.sample_count(dt));
    let mut state = PairState::initial(rho0);
    let mut depleted_seen = false;
    let mut clamped: Option<(f64, f64, usize)> = None;

    let mut record = |t: f64, state: &PairState, defect: f64, warnings: &mut Vec<Warning>| -> Result<()> {
        let rho = state.reported(eq.theory);
        let (row, excess) = sample(t, &rho, &eq.projectors, (state.yield_s, state.yield_t), eq.coherence_mode, &energy);
        records.push(row);
        if let Some(value) = excess {
            clamped = Some(match clamped {
                None => (t, value, 1),
                Some((first, max, n)) => (first, f64::max(max, value), n + 1),
            });
        }
        let mut phys = Physicality::of(t, &rho);
        phys.hermiticity_defect = defect;
        if phys.min_eigenvalue < POSITIVITY_WARNING {
            warnings.push(Warning::Positivity { t, min_eigenvalue: phys.min_eigenvalue });
        }
        physicality.push(phys);
        Ok(())
    };
    record(0.0, &state, hermiticity_defect(rho0.matrix()), &mut warnings)?;

    for step in 1..=steps {
        let mut depleted = false;
        let next = rk4_step(&state, dt, |y: &PairState| {
            let d = eq.derivative(&y.rho, y.number)?;
            depleted |= d.depleted;
            Ok(PairState {
                rho: d.rho,
                number: d.number_rate * y.number,
                yield_s: d.singlet_yield,
                yield_t: d.triplet_yield,
            })
        })?;
        if !next.is_finite() {
            return Err(Error::NonFinite { step });
        }
        let t = step as f64 * dt;
        if depleted && !depleted_seen {
            depleted_seen = true;
            warnings.push(Warning::Depleted { t });
        }
        let defect = if step % config.sample_every == 0 { hermiticity_defect(&next.rho) } else { 0.0 };
        state = next;
        if config.hermitize {
            state.rho = hermitize(&state.rho);
        }
        if step % config.sample_every == 0 {
            record(t, &state, defect, &mut warnings)?;
        }
    }

    if let Some((t, value, count)) = clamped {
        warnings.push(Warning::CoherenceClamped { t, value, count });
    }
    Ok(Evolution { theory: eq.theory, dt, steps, records, physicality, warnings, final_state: state })
}
