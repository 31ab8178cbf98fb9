//! Scenario files: one TOML (or JSON) document describing a complete run.

use std::path::{Path, PathBuf};

use radpair::spin::{basis_state, mixture, superposition};
use radpair::{
    assemble, CoherenceMap, CoherenceMode, DensityOperator, EnergyUnit, HamiltonianSpec, IntegratorConfig,
    MasterEquation, NoReactionUpdate, Operator, Projectors, RateSpec, RemovalRule, SpinSystem, TheoryKind,
    TrajectoryConfig, TrajectorySimulator, C64,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub theories: Vec<TheoryKind>,
    #[serde(default)]
    pub coherence_mode: CoherenceMode,
    #[serde(default = "SpinSystem::electrons_only")]
    pub system: SpinSystem,
    #[serde(default)]
    pub hamiltonian: HamiltonianSpec,
    pub rates: RateSpec,
    pub initial_state: InitialState,
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<TrajectorySection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Exactly one of `label`, `superposition` or `mixture`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superposition: Option<Vec<Amplitude>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<MixtureComponent>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub label: String,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superposition: Option<Vec<Amplitude>>,
}

/// Single-molecule Monte Carlo settings; rates come from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub dt: f64,
    pub max_steps: usize,
    pub n_realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub coherence_map: CoherenceMap,
    #[serde(default)]
    pub update: NoReactionUpdate,
    #[serde(default)]
    pub removal: RemovalRule,
    /// Overrides the scenario-wide mode for trajectories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_mode: Option<CoherenceMode>,
    #[serde(default = "default_series_terms")]
    pub series_terms: usize,
    #[serde(default = "default_ladder_rows")]
    pub ladder_rows: usize,
}

fn default_series_terms() -> usize {
    40
}

fn default_ladder_rows() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), format: OutputFormat::default() }
    }
}

/// Command-line overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub coherence_mode: Option<CoherenceMode>,
    pub format: Option<OutputFormat>,
    pub out: Option<PathBuf>,
}

/// The numerical objects a scenario describes.
#[derive(Debug, Clone)]
pub struct Built {
    pub system: SpinSystem,
    pub projectors: Projectors,
    pub hamiltonian: Operator,
    pub rho0: DensityOperator,
    pub unit: EnergyUnit,
}

impl Scenario {
    pub fn load(path: &Path) -> CliResult<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }?;
        Ok(parsed)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes to TOML")
    }

    /// `trajectory_run` selects which dt/t_max the `--dt`/`--t-max` flags act on.
    pub fn apply(&mut self, o: &Overrides, trajectory_run: bool) -> CliResult<()> {
        if let Some(mode) = o.coherence_mode {
            self.coherence_mode = mode;
            if let Some(t) = self.trajectory.as_mut() {
                t.coherence_mode = Some(mode);
            }
        }
        if let Some(format) = o.format {
            self.output.format = format;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if trajectory_run {
            let t = self
                .trajectory
                .as_mut()
                .ok_or_else(|| CliError::Config("missing [trajectory] section".into()))?;
            if let Some(seed) = o.seed {
                t.seed = seed;
            }
            if let Some(dt) = o.dt {
                t.dt = dt;
            }
            if let Some(t_max) = o.t_max {
                t.max_steps = (t_max / t.dt + 1e-9).floor() as usize;
            }
        } else {
            if let Some(dt) = o.dt {
                self.integrator.dt = Some(dt);
            }
            if let Some(t_max) = o.t_max {
                self.integrator.t_max = t_max;
            }
            if let (Some(seed), Some(t)) = (o.seed, self.trajectory.as_mut()) {
                t.seed = seed;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.theories.is_empty() {
            return Err(CliError::Config("theories: at least one theory is required".into()));
        }
        self.rates.validate().map_err(|e| CliError::Config(format!("rates: {e}")))?;
        self.hamiltonian.validate(&self.system).map_err(|e| CliError::Config(format!("hamiltonian: {e}")))?;
        self.initial_state.build(&self.system)?;
        Ok(())
    }

    pub fn build(&self) -> CliResult<Built> {
        self.validate()?;
        let hamiltonian = assemble(&self.hamiltonian, &self.system)?;
        Ok(Built {
            system: self.system.clone(),
            projectors: Projectors::new(&self.system),
            hamiltonian,
            rho0: self.initial_state.build(&self.system)?,
            unit: EnergyUnit::for_spec(&self.hamiltonian),
        })
    }

    pub fn equation(&self, built: &Built, theory: TheoryKind) -> MasterEquation {
        MasterEquation {
            theory,
            hamiltonian: built.hamiltonian.clone(),
            projectors: built.projectors.clone(),
            rates: self.rates,
            coherence_mode: self.coherence_mode,
        }
    }

    pub fn trajectory_config(&self) -> CliResult<TrajectoryConfig> {
        let t = self.trajectory.as_ref().ok_or_else(|| CliError::Config("missing [trajectory] section".into()))?;
        Ok(TrajectoryConfig {
            dt: t.dt,
            rates: self.rates,
            max_steps: t.max_steps,
            n_realizations: t.n_realizations,
            seed: t.seed,
            coherence_map: t.coherence_map,
            update: t.update,
            removal: t.removal,
            coherence_mode: t.coherence_mode.unwrap_or(self.coherence_mode),
        })
    }

    pub fn simulator(&self, built: &Built) -> CliResult<TrajectorySimulator> {
        let cfg = self.trajectory_config()?;
        TrajectorySimulator::new(built.projectors.clone(), built.hamiltonian.clone(), cfg)
            .map_err(|e| CliError::Config(format!("trajectory: {e}")))
    }
}

fn amplitudes(terms: &[Amplitude]) -> Vec<(String, C64)> {
    terms.iter().map(|a| (a.label.clone(), C64::new(a.re, a.im))).collect()
}

fn pure(label: &Option<String>, terms: &Option<Vec<Amplitude>>, system: &SpinSystem, field: &str) -> CliResult<DensityOperator> {
    let state = match (label, terms) {
        (Some(l), None) => basis_state(l, system),
        (None, Some(t)) => superposition(&amplitudes(t), system),
        _ => return Err(CliError::Config(format!("{field}: give exactly one of `label` or `superposition`"))),
    };
    state.map_err(|e| CliError::Config(format!("{field}: {e}")))
}

impl InitialState {
    pub fn label(label: &str) -> Self {
        InitialState { label: Some(label.to_string()), ..Default::default() }
    }

    pub fn build(&self, system: &SpinSystem) -> CliResult<DensityOperator> {
        match (&self.label, &self.superposition, &self.mixture) {
            (_, _, None) => pure(&self.label, &self.superposition, system, "initial_state"),
            (None, None, Some(parts)) => {
                let comps = parts
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let field = format!("initial_state.mixture[{i}]");
                        Ok((c.weight, pure(&c.label, &c.superposition, system, &field)?))
                    })
                    .collect::<CliResult<Vec<_>>>()?;
                mixture(&comps).map_err(|e| CliError::Config(format!("initial_state.mixture: {e}")))
            }
            _ => Err(CliError::Config(
                "initial_state: give exactly one of `label`, `superposition` or `mixture`".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        theories = ["traditional", "general"]
        [rates]
        k_s = 0.0
        k_t = 1.0
        [initial_state]
        superposition = [{ label = "S", re = 0.6 }, { label = "T0", re = 0.8 }]
        [integrator]
        dt = 0.01
        t_max = 1.0
    "#;

    #[test]
    fn minimal_file_parses_with_defaults() {
        let s: Scenario = toml::from_str(MINIMAL).unwrap();
        assert_eq!(s.system, SpinSystem::electrons_only());
        assert_eq!(s.coherence_mode, CoherenceMode::Normalized);
        assert_eq!(s.output.format, OutputFormat::Both);
        assert!(s.build().is_ok());
    }

    #[test]
    fn unknown_field_names_itself() {
        let text = MINIMAL.replace("k_t = 1.0", "k_t = 1.0\nk_x = 2.0");
        let err = toml::from_str::<Scenario>(&text).unwrap_err().to_string();
        assert!(err.contains("k_x"), "{err}");
    }

    #[test]
    fn empty_theories_rejected() {
        let text = MINIMAL.replace(r#"["traditional", "general"]"#, "[]");
        let s: Scenario = toml::from_str(&text).unwrap();
        assert!(matches!(s.validate(), Err(CliError::Config(m)) if m.starts_with("theories")));
    }

    #[test]
    fn unnormalized_amplitudes_rejected() {
        let text = MINIMAL.replace("re = 0.8", "re = 0.9");
        let s: Scenario = toml::from_str(&text).unwrap();
        assert!(matches!(s.validate(), Err(CliError::Config(m)) if m.starts_with("initial_state")));
    }

    #[test]
    fn ambiguous_initial_state_rejected() {
        let s = InitialState {
            label: Some("S".into()),
            mixture: Some(vec![MixtureComponent { weight: 1.0, label: Some("S".into()), superposition: None }]),
            ..Default::default()
        };
        assert!(s.build(&SpinSystem::electrons_only()).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s: Scenario = toml::from_str(MINIMAL).unwrap();
        let back: Scenario = toml::from_str(&s.to_toml()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn overrides_target_the_right_section() {
        let mut s: Scenario = toml::from_str(MINIMAL).unwrap();
        s.apply(&Overrides { dt: Some(0.5), t_max: Some(3.0), ..Default::default() }, false).unwrap();
        assert_eq!(s.integrator.dt, Some(0.5));
        assert_eq!(s.integrator.t_max, 3.0);
        assert!(s.apply(&Overrides::default(), true).is_err());
    }
}
