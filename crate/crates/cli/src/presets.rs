//! Built-in scenarios for the three numerical experiments.

use std::f64::consts::FRAC_1_SQRT_2;

use radpair::{
    CoherenceMap, CoherenceMode, HamiltonianSpec, HyperfineTerm, IntegratorConfig, NoReactionUpdate, RateSpec,
    RemovalRule, SpinSystem, TheoryKind,
};

use crate::error::{CliError, CliResult};
use crate::scenario::{Amplitude, InitialState, OutputSection, Scenario, TrajectorySection};

pub const NAMES: [&str; 3] = ["fig3", "fig5", "fig6"];

pub fn preset(name: &str) -> CliResult<Scenario> {
    match name {
        "fig3" => Ok(fig3()),
        "fig5" => Ok(fig5()),
        "fig6" => Ok(fig6()),
        _ => Err(CliError::Config(format!("unknown preset `{name}` (known: {})", NAMES.join(", ")))),
    }
}

fn coherent_start() -> InitialState {
    InitialState {
        superposition: Some(vec![
            Amplitude { label: "S".into(), re: FRAC_1_SQRT_2, im: 0.0 },
            Amplitude { label: "T0".into(), re: FRAC_1_SQRT_2, im: 0.0 },
        ]),
        ..Default::default()
    }
}

fn output(name: &str) -> OutputSection {
    OutputSection { dir: format!("out/{name}").into(), ..Default::default() }
}

/// Bare electron pair in (|S⟩+|T₀⟩)/√2, triplet channel only, 𝓗 = 0.
/// Time in units of 1/k_T.
pub fn fig3() -> Scenario {
    Scenario {
        theories: TheoryKind::ALL.to_vec(),
        coherence_mode: CoherenceMode::Normalized,
        system: SpinSystem::electrons_only(),
        hamiltonian: HamiltonianSpec::default(),
        rates: RateSpec { k_s: 0.0, k_t: 1.0 },
        initial_state: coherent_start(),
        integrator: IntegratorConfig::new(1e-3, 20.0, 10),
        trajectory: None,
        output: output("fig3"),
    }
}

/// The single-molecule ladder with k_T·dt = 1: coherence halves in amplitude
/// per no-reaction step and populations are left untouched.
pub fn fig5() -> Scenario {
    Scenario {
        theories: vec![TheoryKind::General],
        trajectory: Some(TrajectorySection {
            dt: 1.0,
            max_steps: 60,
            n_realizations: 100_000,
            seed: 20_110_601,
            coherence_map: CoherenceMap::PaperLadder,
            update: NoReactionUpdate::DecoherenceOnly,
            removal: RemovalRule::CoherenceWeighted,
            coherence_mode: Some(CoherenceMode::Raw),
            series_terms: 40,
            ladder_rows: 20,
        }),
        output: output("fig5"),
        ..fig3()
    }
}

/// One spin-½ nucleus coupled to electron 1, J = 20, a = 1, starting in |↑↑⇓⟩.
pub fn fig6() -> Scenario {
    Scenario {
        theories: vec![TheoryKind::Traditional, TheoryKind::JonesHore, TheoryKind::General],
        coherence_mode: CoherenceMode::Normalized,
        system: SpinSystem::new(&[0.5]).expect("spin ½ is valid"),
        hamiltonian: HamiltonianSpec {
            exchange_j: 20.0,
            hyperfine: vec![HyperfineTerm { electron: 1, nucleus: 0, coupling: 1.0 }],
            zeeman: [0.0, 0.0],
        },
        rates: RateSpec { k_s: 0.0, k_t: 1.0 },
        initial_state: InitialState::label("++-"),
        integrator: IntegratorConfig::new(1e-3, 10.0, 10),
        trajectory: None,
        output: output("fig6"),
    }
}
