//! Scalar diagnostics sampled along a trajectory of ρ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::master::{coherence_measure_clamped, populations, CoherenceMode, COHERENCE_CLAMP_TOLERANCE, TRACE_FLOOR};
use crate::spin::{hermiticity_defect, min_eigenvalue, Operator, Projectors, C64};

/// One sampled row. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub trace: f64,
    pub qs_frac: f64,
    pub qt_frac: f64,
    pub qs_abs: f64,
    pub qt_abs: f64,
    pub p_coh: f64,
    #[serde(rename = "yield_S")]
    pub yield_s: f64,
    #[serde(rename = "yield_T")]
    pub yield_t: f64,
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    #[serde(rename = "delta_E_times_t")]
    pub delta_e_times_t: f64,
}

impl TimeSeriesRecord {
    pub const COLUMNS: [&'static str; 11] = [
        "t",
        "trace",
        "qs_frac",
        "qt_frac",
        "qs_abs",
        "qt_abs",
        "p_coh",
        "yield_S",
        "yield_T",
        "delta_E",
        "delta_E_times_t",
    ];

    /// |Tr{ρ} + Y_S + Y_T − 1|
    pub fn closure_defect(&self) -> f64 {
        (self.trace + self.yield_s + self.yield_t - 1.0).abs()
    }
}

/// Tr{ρ·op}
pub fn expectation(rho: &Operator, op: &Operator) -> C64 {
    (rho * op).trace()
}

/// Energy scale used for reporting ΔE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyUnit {
    pub name: String,
    pub scale: f64,
}

impl EnergyUnit {
    pub fn absolute() -> Self {
        EnergyUnit { name: "absolute".into(), scale: 1.0 }
    }

    /// J when exchange is present, else the first nonzero hyperfine coupling, else absolute.
    pub fn for_spec(spec: &HamiltonianSpec) -> Self {
        if spec.exchange_j != 0.0 {
            return EnergyUnit { name: "J".into(), scale: spec.exchange_j.abs() };
        }
        if let Some(term) = spec.hyperfine.iter().find(|t| t.coupling != 0.0) {
            return EnergyUnit { name: "a".into(), scale: term.coupling.abs() };
        }
        EnergyUnit::absolute()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyShift {
    /// ΔE in the Hamiltonian's own units.
    pub raw: f64,
    /// ΔE divided by the reporting energy unit.
    pub in_unit: f64,
    /// ΔE·t, dimensionless and independent of the unit choice.
    pub times_t: f64,
}

/// ΔE(t) = Tr{ρ_t𝓗} − Tr{ρ_0𝓗}·Tr{ρ_t} against a fixed unit-trace initial state.
#[derive(Debug, Clone)]
pub struct EnergyReference {
    hamiltonian: Operator,
    initial_energy: f64,
    unit: EnergyUnit,
}

/// Allowed deviation of the initial trace from 1.
pub const UNIT_TRACE_TOLERANCE: f64 = 1e-10;

impl EnergyReference {
    pub fn new(rho0: &Operator, hamiltonian: &Operator, unit: EnergyUnit) -> Result<Self> {
        let tr = rho0.trace().re;
        if (tr - 1.0).abs() > UNIT_TRACE_TOLERANCE {
            return Err(Error::Config(format!("initial state must have unit trace, found {tr}")));
        }
        Ok(EnergyReference {
            hamiltonian: hamiltonian.clone(),
            initial_energy: expectation(rho0, hamiltonian).re,
            unit,
        })
    }

    pub fn initial_energy(&self) -> f64 {
        self.initial_energy
    }

    pub fn unit(&self) -> &EnergyUnit {
        &self.unit
    }

    pub fn delta(&self, t: f64, rho: &Operator) -> EnergyShift {
        let raw = expectation(rho, &self.hamiltonian).re - self.initial_energy * rho.trace().re;
        EnergyShift { raw, in_unit: raw / self.unit.scale, times_t: raw * t }
    }
}

/// Build the observable row for a (reported) density matrix.
///
/// The second value is the unclamped p_coh when it exceeded 1 by more than
/// the clamp tolerance.
pub fn sample(
    t: f64,
    rho: &Operator,
    projectors: &Projectors,
    yields: (f64, f64),
    mode: CoherenceMode,
    energy: &EnergyReference,
) -> (TimeSeriesRecord, Option<f64>) {
    let trace = rho.trace().re;
    let (qs_abs, qt_abs) = populations(rho, projectors);
    let (qs_frac, qt_frac) =
        if trace > TRACE_FLOOR { (qs_abs / trace, qt_abs / trace) } else { (0.0, 0.0) };
    let coherence = coherence_measure_clamped(rho, projectors, mode);
    let p_coh = coherence.coherence.value;
    let excess = coherence.excess.filter(|v| *v > 1.0 + COHERENCE_CLAMP_TOLERANCE);
    let de = energy.delta(t, rho);
    let record = TimeSeriesRecord {
        t,
        trace,
        qs_frac,
        qt_frac,
        qs_abs,
        qt_abs,
        p_coh,
        yield_s: yields.0,
        yield_t: yields.1,
        delta_e: de.in_unit,
        delta_e_times_t: de.times_t,
    };
    (record, excess)
}

/// Physicality of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Physicality {
    pub t: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_defect: f64,
}

impl Physicality {
    pub fn of(t: f64, rho: &Operator) -> Self {
        Physicality { t, min_eigenvalue: min_eigenvalue(rho), hermiticity_defect: hermiticity_defect(rho) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{assemble, HyperfineTerm};
    use crate::spin::{basis_state, coherent_pair, SpinSystem};
    use approx::assert_abs_diff_eq;

    fn fig6_spec() -> HamiltonianSpec {
        HamiltonianSpec {
            exchange_j: 20.0,
            hyperfine: vec![HyperfineTerm { electron: 1, nucleus: 0, coupling: 1.0 }],
            zeeman: [0.0, 0.0],
        }
    }

    #[test]
    fn singlet_expectations() {
        let sys = SpinSystem::electrons_only();
        let p = Projectors::new(&sys);
        let s = basis_state("S", &sys).unwrap();
        assert_abs_diff_eq!(expectation(s.matrix(), &p.singlet).re, 1.0, epsilon = 1e-15);
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let c = coherent_pair(r, r).unwrap();
        assert_abs_diff_eq!(expectation(c.matrix(), &p.singlet).re, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn energy_of_up_up_down() {
        // Oracle: diagonal element of 𝓗 in the product basis, −J/4 − a/4.
        let sys = SpinSystem::new(&[0.5]).unwrap();
        let h = assemble(&fig6_spec(), &sys).unwrap();
        let rho = basis_state("++-", &sys).unwrap();
        assert_abs_diff_eq!(expectation(rho.matrix(), &h).re, -5.0 - 0.25, epsilon = 1e-14);
    }

    #[test]
    fn delta_energy_vanishes_at_start() {
        let sys = SpinSystem::new(&[0.5]).unwrap();
        let h = assemble(&fig6_spec(), &sys).unwrap();
        let rho = basis_state("++-", &sys).unwrap().into_matrix();
        let e = EnergyReference::new(&rho, &h, EnergyUnit::for_spec(&fig6_spec())).unwrap();
        let d = e.delta(0.0, &rho);
        assert_eq!(d.raw, 0.0);
        assert_eq!(d.times_t, 0.0);
    }

    #[test]
    fn delta_energy_cancels_identity_shift_for_any_trace() {
        let sys = SpinSystem::new(&[0.5]).unwrap();
        let h = assemble(&fig6_spec(), &sys).unwrap();
        let shifted = &h + crate::spin::identity(8) * C64::new(3.3, 0.0);
        let rho0 = basis_state("++-", &sys).unwrap().into_matrix();
        let later = basis_state("+-+", &sys).unwrap().into_matrix() * C64::new(0.37, 0.0);
        let a = EnergyReference::new(&rho0, &h, EnergyUnit::absolute()).unwrap().delta(2.0, &later);
        let b = EnergyReference::new(&rho0, &shifted, EnergyUnit::absolute()).unwrap().delta(2.0, &later);
        assert_abs_diff_eq!(a.raw, b.raw, epsilon = 1e-13);
    }

    #[test]
    fn energy_unit_selection() {
        assert_eq!(EnergyUnit::for_spec(&fig6_spec()).scale, 20.0);
        let hf_only = HamiltonianSpec { exchange_j: 0.0, ..fig6_spec() };
        assert_eq!(EnergyUnit::for_spec(&hf_only).name, "a");
        assert_eq!(EnergyUnit::for_spec(&HamiltonianSpec::default()), EnergyUnit::absolute());
    }

    #[test]
    fn non_unit_initial_trace_rejected() {
        let rho = crate::spin::identity(4) * C64::new(0.5, 0.0);
        assert!(EnergyReference::new(&rho, &crate::spin::identity(4), EnergyUnit::absolute()).is_err());
    }

    #[test]
    fn sample_fractions_sum_to_one() {
        let sys = SpinSystem::new(&[0.5]).unwrap();
        let p = Projectors::new(&sys);
        let h = assemble(&fig6_spec(), &sys).unwrap();
        let rho = basis_state("+-+", &sys).unwrap().into_matrix();
        let e = EnergyReference::new(&rho, &h, EnergyUnit::absolute()).unwrap();
        let scaled = &rho * C64::new(0.6, 0.0);
        let (rec, excess) = sample(1.0, &scaled, &p, (0.1, 0.3), CoherenceMode::Normalized, &e);
        assert_eq!(excess, None);
        assert_abs_diff_eq!(rec.qs_frac + rec.qt_frac, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(rec.qs_abs + rec.qt_abs, rec.trace, epsilon = 1e-14);
        assert_abs_diff_eq!(rec.closure_defect(), 0.0, epsilon = 1e-14);
        assert!((0.0..=1.0).contains(&rec.p_coh));
    }
}
