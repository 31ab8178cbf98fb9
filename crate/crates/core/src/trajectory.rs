//! Single-molecule realizations with discrete reaction/no-reaction branching.
//!
//! At every step a pair in the unit-trace state σ reacts through the singlet
//! channel with probability p_S = k_S·dt·⟨Q_S⟩ and through the triplet channel
//! with p_T = k_T·dt·⟨Q_T⟩. Otherwise it moves to the next rung of the
//! no-reaction ladder. The ladder is deterministic, so all realizations of an
//! ensemble share it and only the branch draws differ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{rk4_step, spectral_norm};
use crate::master::{coherence_measure_clamped, populations, rhs_kominis_nonreacted, CoherenceMode, RateSpec};
use crate::spin::{hermitize, DensityOperator, Operator, Projectors, C64};

/// How singlet–triplet coherences shrink over one no-reaction step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoherenceMap {
    /// Off-diagonal blocks scaled by 1 − (k_S+k_T)dt/2, which halves them at k_T·dt = 1.
    #[default]
    PaperLadder,
    /// Exact flow of the decoherence generator: factor e^{−(k_S+k_T)dt/2}.
    Exponential,
}

/// What happens to the state of a pair that did not react during a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoReactionUpdate {
    /// Decoherence only; populations are untouched.
    #[default]
    DecoherenceOnly,
    /// Condition on the null result before decohering: the coherent fraction
    /// p_coh of the loss is taken from the whole state, the rest from the
    /// singlet and triplet blocks. The ensemble average follows the general
    /// master equation as dt → 0.
    Conditioned,
}

/// Weight used for the whole-state part of the conditioned update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalRule {
    #[default]
    CoherenceWeighted,
    /// Always remove block-wise (p_coh treated as 0).
    Incoherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub rates: RateSpec,
    pub max_steps: usize,
    pub n_realizations: usize,
    pub seed: u64,
    #[serde(default)]
    pub coherence_map: CoherenceMap,
    #[serde(default)]
    pub update: NoReactionUpdate,
    #[serde(default)]
    pub removal: RemovalRule,
    #[serde(default)]
    pub coherence_mode: CoherenceMode,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("trajectory dt must be positive, got {}", self.dt)));
        }
        if self.rates.k_s * self.dt > 1.0 || self.rates.k_t * self.dt > 1.0 {
            return Err(Error::Config(format!(
                "step probabilities exceed 1: k_S·dt = {}, k_T·dt = {}",
                self.rates.k_s * self.dt,
                self.rates.k_t * self.dt
            )));
        }
        if self.max_steps == 0 || self.n_realizations == 0 {
            return Err(Error::Config("max_steps and n_realizations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fate {
    SingletProduct,
    TripletProduct,
    Survived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub fate: Fate,
    /// Step at which the pair reacted; `None` iff it survived.
    pub reaction_step: Option<usize>,
    /// p_coh of the state at each step the pair was alive.
    pub p_coh_history: Vec<f64>,
}

/// Branch probabilities and coherence of the state at one ladder position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub step: usize,
    pub p_singlet: f64,
    pub p_triplet: f64,
    pub p_coh: f64,
}

impl Rung {
    pub fn p_react(&self) -> f64 {
        self.p_singlet + self.p_triplet
    }

    fn branch(&self, u: f64) -> Option<Fate> {
        if u < self.p_singlet {
            Some(Fate::SingletProduct)
        } else if u < self.p_singlet + self.p_triplet {
            Some(Fate::TripletProduct)
        } else {
            None
        }
    }
}

/// Independent stream for realization `index`, derived only from (seed, index).
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct TrajectorySimulator {
    projectors: Projectors,
    hamiltonian: Operator,
    config: TrajectoryConfig,
}

impl TrajectorySimulator {
    pub fn new(projectors: Projectors, hamiltonian: Operator, config: TrajectoryConfig) -> Result<Self> {
        config.validate()?;
        if hamiltonian.nrows() != projectors.dim() {
            return Err(Error::DimensionMismatch { expected: projectors.dim(), found: hamiltonian.nrows() });
        }
        let has_h = hamiltonian.iter().any(|z| *z != C64::new(0.0, 0.0));
        if has_h && config.coherence_map == CoherenceMap::PaperLadder {
            return Err(Error::Config("the paper-ladder coherence map requires a zero Hamiltonian".into()));
        }
        Ok(TrajectorySimulator { projectors, hamiltonian, config })
    }

    pub fn config(&self) -> &TrajectoryConfig {
        &self.config
    }

    pub fn ladder(&self, rho0: &DensityOperator) -> Result<Ladder<'_>> {
        let tr = rho0.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("trajectory initial state must have unit trace, found {tr}")));
        }
        if rho0.dim() != self.projectors.dim() {
            return Err(Error::DimensionMismatch { expected: self.projectors.dim(), found: rho0.dim() });
        }
        Ok(Ladder { sim: self, state: rho0.matrix().clone(), step: 0 })
    }

    /// The first `max_steps` rungs of the no-reaction ladder.
    pub fn rungs(&self, rho0: &DensityOperator) -> Result<Vec<Rung>> {
        let mut ladder = self.ladder(rho0)?;
        let mut out = Vec::with_capacity(self.config.max_steps);
        for _ in 0..self.config.max_steps {
            out.push(ladder.current()?);
            ladder.advance()?;
        }
        Ok(out)
    }

    pub fn run_single<R: Rng>(&self, rho0: &DensityOperator, rng: &mut R) -> Result<TrajectoryOutcome> {
        let mut ladder = self.ladder(rho0)?;
        let mut history = Vec::new();
        for step in 0..self.config.max_steps {
            let rung = ladder.current()?;
            history.push(rung.p_coh);
            if let Some(fate) = rung.branch(rng.gen::<f64>()) {
                return Ok(TrajectoryOutcome { fate, reaction_step: Some(step), p_coh_history: history });
            }
            ladder.advance()?;
        }
        Ok(TrajectoryOutcome { fate: Fate::Survived, reaction_step: None, p_coh_history: history })
    }

    /// Runs `n_realizations` trajectories on per-index streams and tallies fates.
    pub fn run_ensemble(&self, rho0: &DensityOperator) -> Result<EnsembleResult> {
        let rungs = self.rungs(rho0)?;
        // Draws past the last rung that can react cannot change a fate.
        let live = rungs.iter().rposition(|r| r.p_react() > 0.0).map_or(0, |i| i + 1);
        let rungs = &rungs[..live];
        let seed = self.config.seed;
        let counts = (0..self.config.n_realizations as u64)
            .into_par_iter()
            .map(|index| {
                let mut rng = trajectory_rng(seed, index);
                let fate = rungs
                    .iter()
                    .find_map(|rung| rung.branch(rng.gen::<f64>()))
                    .unwrap_or(Fate::Survived);
                FateCounts::one(fate)
            })
            .reduce(FateCounts::default, FateCounts::merge);
        Ok(EnsembleResult { counts, n: self.config.n_realizations })
    }

    /// Partial sums of Y_T = p_tr + p_coh(0)·p_nr·p_tr + p_coh(dt)·p_nr²·p_tr + …
    ///
    /// Term k ≥ 1 is p_coh at rung k−1 times the probability of k
    /// non-reactions times the triplet probability at rung k.
    pub fn yield_series(&self, rho0: &DensityOperator, n_terms: usize) -> Result<Vec<f64>> {
        if self.config.rates.k_s != 0.0 {
            return Err(Error::Config("the yield series assumes a single (triplet) channel, k_S = 0".into()));
        }
        let mut ladder = self.ladder(rho0)?;
        let mut sums = Vec::with_capacity(n_terms);
        let mut total = 0.0;
        let mut survive = 1.0;
        let mut previous_coh = 1.0;
        for k in 0..n_terms {
            let rung = ladder.current()?;
            let weight = if k == 0 { 1.0 } else { previous_coh };
            total += weight * survive * rung.p_triplet;
            sums.push(total);
            survive *= 1.0 - rung.p_react();
            previous_coh = rung.p_coh;
            ladder.advance()?;
        }
        Ok(sums)
    }
}

/// Walks the no-reaction branch one step at a time.
#[derive(Debug, Clone)]
pub struct Ladder<'a> {
    sim: &'a TrajectorySimulator,
    state: Operator,
    step: usize,
}

impl Ladder<'_> {
    pub fn state(&self) -> &Operator {
        &self.state
    }

    pub fn current(&self) -> Result<Rung> {
        let cfg = &self.sim.config;
        let (qs, qt) = populations(&self.state, &self.sim.projectors);
        let p_singlet = cfg.rates.k_s * cfg.dt * qs;
        let p_triplet = cfg.rates.k_t * cfg.dt * qt;
        if p_singlet + p_triplet > 1.0 + 1e-12 {
            return Err(Error::Config(format!("reaction probability {} exceeds 1", p_singlet + p_triplet)));
        }
        let p_coh = coherence_measure_clamped(&self.state, &self.sim.projectors, cfg.coherence_mode).coherence.value;
        Ok(Rung { step: self.step, p_singlet, p_triplet, p_coh })
    }

    /// Move to the state of a pair that did not react during this step.
    pub fn advance(&mut self) -> Result<()> {
        let sim = self.sim;
        let cfg = &sim.config;
        if cfg.update == NoReactionUpdate::Conditioned {
            self.condition()?;
        }
        self.state = hermitize(&self.decohere());
        self.step += 1;
        Ok(())
    }

    fn condition(&mut self) -> Result<()> {
        let sim = self.sim;
        let cfg = &sim.config;
        let rung = self.current()?;
        let survive = 1.0 - rung.p_react();
        if survive <= 0.0 {
            // Every pair reacts; the state is never observed again.
            return Ok(());
        }
        let weight = match cfg.removal {
            RemovalRule::CoherenceWeighted => rung.p_coh,
            RemovalRule::Incoherent => 0.0,
        };
        let p = &sim.projectors;
        let s = &self.state;
        let mut next = s * C64::new(1.0 - weight * rung.p_react(), 0.0);
        for (k, q) in [(cfg.rates.k_s, &p.singlet), (cfg.rates.k_t, &p.triplet)] {
            if k != 0.0 {
                next -= (q * s * q) * C64::new((1.0 - weight) * k * cfg.dt, 0.0);
            }
        }
        self.state = next / C64::new(survive, 0.0);
        Ok(())
    }

    fn decohere(&self) -> Operator {
        let cfg = &self.sim.config;
        let p = &self.sim.projectors;
        let total = cfg.rates.total() * cfg.dt;
        let has_h = self.sim.hamiltonian.iter().any(|z| *z != C64::new(0.0, 0.0));
        let factor = match cfg.coherence_map {
            CoherenceMap::PaperLadder => 1.0 - 0.5 * total,
            CoherenceMap::Exponential if !has_h => (-0.5 * total).exp(),
            CoherenceMap::Exponential => return self.decohere_with_hamiltonian(),
        };
        let s = &self.state;
        let qs_s = &p.singlet * s;
        let qt_s = &p.triplet * s;
        let diag = &qs_s * &p.singlet + &qt_s * &p.triplet;
        let off = &qs_s * &p.triplet + &qt_s * &p.singlet;
        diag + off * C64::new(factor, 0.0)
    }

    fn decohere_with_hamiltonian(&self) -> Operator {
        let cfg = &self.sim.config;
        let (h, p) = (&self.sim.hamiltonian, &self.sim.projectors);
        let scale = spectral_norm(h).max(cfg.rates.total());
        let substeps = ((cfg.dt * scale / 0.05).ceil() as usize).max(1);
        let h_dt = cfg.dt / substeps as f64;
        let mut s = StateMatrix(self.state.clone());
        for _ in 0..substeps {
            s = rk4_step(&s, h_dt, |y: &StateMatrix| Ok(StateMatrix(rhs_kominis_nonreacted(&y.0, h, p, &cfg.rates))))
                .expect("decoherence generator is infallible");
        }
        s.0
    }
}

#[derive(Debug, Clone)]
struct StateMatrix(Operator);

impl crate::integrator::OdeState for StateMatrix {
    fn add_scaled(&self, a: f64, d: &Self) -> Self {
        StateMatrix(&self.0 + &d.0 * C64::new(a, 0.0))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FateCounts {
    pub singlet: u64,
    pub triplet: u64,
    pub survived: u64,
}

impl FateCounts {
    fn one(fate: Fate) -> Self {
        let mut c = FateCounts::default();
        match fate {
            Fate::SingletProduct => c.singlet = 1,
            Fate::TripletProduct => c.triplet = 1,
            Fate::Survived => c.survived = 1,
        }
        c
    }

    fn merge(a: Self, b: Self) -> Self {
        FateCounts {
            singlet: a.singlet + b.singlet,
            triplet: a.triplet + b.triplet,
            survived: a.survived + b.survived,
        }
    }

    pub fn get(&self, fate: Fate) -> u64 {
        match fate {
            Fate::SingletProduct => self.singlet,
            Fate::TripletProduct => self.triplet,
            Fate::Survived => self.survived,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub counts: FateCounts,
    pub n: usize,
}

impl EnsembleResult {
    pub fn fraction(&self, fate: Fate) -> f64 {
        self.counts.get(fate) as f64 / self.n as f64
    }

    /// Binomial standard error sqrt(f(1 − f)/n).
    pub fn standard_error(&self, fate: Fate) -> f64 {
        let f = self.fraction(fate);
        (f * (1.0 - f) / self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{basis_state, coherent_pair, mixture, SpinSystem};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn coherent() -> DensityOperator {
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        coherent_pair(r, r).unwrap()
    }

    fn ladder_config() -> TrajectoryConfig {
        TrajectoryConfig {
            dt: 1.0,
            rates: RateSpec::new(0.0, 1.0).unwrap(),
            max_steps: 40,
            n_realizations: 1000,
            seed: 7,
            coherence_map: CoherenceMap::PaperLadder,
            update: NoReactionUpdate::DecoherenceOnly,
            removal: RemovalRule::CoherenceWeighted,
            coherence_mode: CoherenceMode::Raw,
        }
    }

    fn sim(config: TrajectoryConfig) -> TrajectorySimulator {
        let sys = SpinSystem::electrons_only();
        TrajectorySimulator::new(Projectors::new(&sys), Operator::zeros(4, 4), config).unwrap()
    }

    #[test]
    fn ladder_reproduces_halving_of_coherence() {
        let rungs = sim(ladder_config()).rungs(&coherent()).unwrap();
        assert_abs_diff_eq!(rungs[0].p_triplet, 0.5, epsilon = 1e-15);
        let expected = [1.0, 0.25, 1.0 / 16.0, 1.0 / 64.0];
        for (rung, want) in rungs.iter().zip(expected) {
            assert_abs_diff_eq!(rung.p_coh, want, epsilon = 1e-12);
            assert_abs_diff_eq!(rung.p_triplet, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn non_reactive_singlet_survives() {
        let sys = SpinSystem::electrons_only();
        let s = basis_state("S", &sys).unwrap();
        let out = sim(ladder_config()).run_single(&s, &mut trajectory_rng(1, 0)).unwrap();
        assert_eq!(out.fate, Fate::Survived);
        assert_eq!(out.reaction_step, None);
        assert!(out.p_coh_history.iter().all(|&p| p == 0.0));
        assert_eq!(out.p_coh_history.len(), 40);
    }

    #[test]
    fn zero_rates_all_survive() {
        let mut cfg = ladder_config();
        cfg.rates = RateSpec::default();
        let res = sim(cfg).run_ensemble(&coherent()).unwrap();
        assert_eq!(res.counts.survived, 1000);
        assert_eq!(res.standard_error(Fate::Survived), 0.0);
    }

    #[test]
    fn incoherent_start_splits_evenly() {
        let sys = SpinSystem::electrons_only();
        let rho = mixture(&[(0.5, basis_state("S", &sys).unwrap()), (0.5, basis_state("T0", &sys).unwrap())])
            .unwrap();
        let mut cfg = ladder_config();
        cfg.update = NoReactionUpdate::Conditioned;
        cfg.n_realizations = 20_000;
        let res = sim(cfg).run_ensemble(&rho).unwrap();
        let f = res.fraction(Fate::TripletProduct);
        assert!((f - 0.5).abs() < 3.0 * res.standard_error(Fate::TripletProduct), "{f}");
    }

    #[test]
    fn single_runs_match_ensemble_streams() {
        let mut cfg = ladder_config();
        cfg.update = NoReactionUpdate::Conditioned;
        cfg.coherence_map = CoherenceMap::Exponential;
        cfg.dt = 0.05;
        cfg.max_steps = 400;
        cfg.n_realizations = 64;
        let s = sim(cfg.clone());
        let mut tally = FateCounts::default();
        for index in 0..64 {
            let out = s.run_single(&coherent(), &mut trajectory_rng(cfg.seed, index)).unwrap();
            assert_eq!(out.fate == Fate::Survived, out.reaction_step.is_none());
            tally = FateCounts::merge(tally, FateCounts::one(out.fate));
        }
        assert_eq!(s.run_ensemble(&coherent()).unwrap().counts, tally);
    }

    #[test]
    fn same_seed_same_fates() {
        let s = sim(ladder_config());
        let a = s.run_ensemble(&coherent()).unwrap();
        let b = s.run_ensemble(&coherent()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn yield_series_first_terms() {
        let sums = sim(ladder_config()).yield_series(&coherent(), 30).unwrap();
        assert_abs_diff_eq!(sums[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(sums[1], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(sums[2], 0.75 + 1.0 / 32.0, epsilon = 1e-15);
        // Oracle: Σ_k 4^{−(k−1)}·2^{−(k+1)} for k ≥ 1, summed in closed form.
        // ½ + Σ_{k≥1} 2^{−(3k−1)} = ½ + 2·(1/8)/(1 − 1/8) = ½ + 2/7.
        assert_abs_diff_eq!(*sums.last().unwrap(), 0.5 + 2.0 / 7.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let sys = SpinSystem::electrons_only();
        let mut cfg = ladder_config();
        cfg.dt = 2.0;
        assert!(cfg.validate().is_err());
        let mut h = Operator::zeros(4, 4);
        h[(0, 0)] = C64::new(1.0, 0.0);
        assert!(TrajectorySimulator::new(Projectors::new(&sys), h, ladder_config()).is_err());
        let mut cfg = ladder_config();
        cfg.rates.k_s = 0.5;
        assert!(sim(cfg).yield_series(&coherent(), 3).is_err());
    }

    #[test]
    fn exponential_map_with_hamiltonian_uses_generator() {
        let sys = SpinSystem::electrons_only();
        let mut cfg = ladder_config();
        cfg.coherence_map = CoherenceMap::Exponential;
        cfg.rates = RateSpec::new(0.0, 0.5).unwrap();
        cfg.dt = 0.2;
        // Zero Hamiltonian written as a tiny diagonal shift commutes with everything.
        let h = crate::spin::identity(4) * C64::new(1e-3, 0.0);
        let with_h = TrajectorySimulator::new(Projectors::new(&sys), h, cfg.clone()).unwrap();
        let without = sim(cfg);
        let mut a = with_h.ladder(&coherent()).unwrap();
        let mut b = without.ladder(&coherent()).unwrap();
        a.advance().unwrap();
        b.advance().unwrap();
        let diff = (a.state() - b.state()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn branch_probabilities_track_current_state(kdt in 0.01..1.0f64, steps in 1usize..12) {
            let mut cfg = ladder_config();
            cfg.rates = RateSpec::new(0.0, kdt).unwrap();
            let s = sim(cfg);
            let mut ladder = s.ladder(&coherent()).unwrap();
            let mut last = f64::INFINITY;
            for _ in 0..steps {
                let rung = ladder.current().unwrap();
                let (_, qt) = populations(ladder.state(), &s.projectors);
                prop_assert_eq!(rung.p_triplet, kdt * qt);
                prop_assert!(rung.p_coh <= last);
                last = rung.p_coh;
                ladder.advance().unwrap();
            }
        }
    }
}
