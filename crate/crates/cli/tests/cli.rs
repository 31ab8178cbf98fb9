use std::path::Path;
use std::process::{Command, Output};

use radpair_cli::presets::preset;
use radpair_cli::report::{CompareReport, McReport, RunSummary};
use radpair_cli::Scenario;
use radpair::TimeSeriesRecord;
use tempfile::TempDir;

fn radpair(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radpair")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, s: &Scenario) -> String {
    let path = dir.join(name);
    std::fs::write(&path, s.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn preset_fig3_writes_series_with_contract_columns() {
    let tmp = TempDir::new().unwrap();
    let o = radpair(&["preset", "fig3", "--t-max", "2", "--out", "f3"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for theory in ["traditional", "jones-hore", "kominis-pair", "general"] {
        let text = std::fs::read_to_string(tmp.path().join(format!("f3/{theory}.csv"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TimeSeriesRecord::COLUMNS.join(","));
        // floor(t_max/(dt·sample_every)) + 1 = floor(2/(1e-3·10)) + 1
        assert_eq!(lines.count(), 201);
    }
    let summary: RunSummary = read_json(&tmp.path().join("f3/summary.json"));
    assert_eq!(summary.theories.len(), 4);
    assert_eq!(summary.scenario.integrator.t_max, 2.0);
    assert_eq!(summary.version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn compare_fig3_separates_general_from_traditional() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_scenario(tmp.path(), "fig3.toml", &preset("fig3").unwrap());
    let o = radpair(&["compare", &cfg, "--out", "cmp", "--format", "json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: CompareReport = read_json(&tmp.path().join("cmp/compare.json"));
    let d = report.deviations.iter().find(|d| d.a == "traditional" && d.b == "general").unwrap();
    assert!((d.final_yield_t_difference.abs() - 0.25).abs() < 0.01, "{}", d.final_yield_t_difference);
    assert!(!tmp.path().join("cmp/general.csv").exists());
}

#[test]
fn identical_theories_have_zero_deviation() {
    let tmp = TempDir::new().unwrap();
    let mut s = preset("fig3").unwrap();
    s.theories = vec![radpair::TheoryKind::General, radpair::TheoryKind::General];
    s.integrator.t_max = 1.0;
    let cfg = write_scenario(tmp.path(), "twin.toml", &s);
    let o = radpair(&["compare", &cfg, "--out", "twin"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let report: CompareReport = read_json(&tmp.path().join("twin/compare.json"));
    assert_eq!(report.deviations[0].max_qs_abs_deviation, 0.0);
    assert!(tmp.path().join("twin/general-2.csv").exists());
}

#[test]
fn single_theory_compare_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut s = preset("fig3").unwrap();
    s.theories.truncate(1);
    let cfg = write_scenario(tmp.path(), "one.toml", &s);
    let o = radpair(&["compare", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theories"));
}

#[test]
fn empty_theory_list_exits_2() {
    let tmp = TempDir::new().unwrap();
    let mut s = preset("fig3").unwrap();
    s.theories.clear();
    let cfg = write_scenario(tmp.path(), "none.toml", &s);
    let o = radpair(&["run", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theories"), "{}", stderr(&o));
}

#[test]
fn schema_violation_names_the_field() {
    let tmp = TempDir::new().unwrap();
    let text = preset("fig6").unwrap().to_toml().replace("exchange_j", "exchange_J");
    std::fs::write(tmp.path().join("bad.toml"), text).unwrap();
    let o = radpair(&["run", "bad.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exchange_J"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_and_missing_file_fail() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(radpair(&["preset", "fig4"], tmp.path()).status.code(), Some(2));
    assert_ne!(radpair(&["run", "absent.toml"], tmp.path()).status.code(), Some(0));
}

#[test]
fn overflowing_run_exits_3_with_step() {
    let tmp = TempDir::new().unwrap();
    let mut s = preset("fig3").unwrap();
    s.rates.k_t = 1e200;
    s.integrator.dt = Some(1.0);
    s.integrator.t_max = 50.0;
    let cfg = write_scenario(tmp.path(), "blowup.toml", &s);
    let o = radpair(&["run", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"), "{}", stderr(&o));
}

#[test]
fn echoed_scenario_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let o = radpair(&["preset", "fig6", "--t-max", "1", "--out", "a"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = radpair(&["run", "a/scenario.toml", "--out", "b"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for theory in ["traditional", "jones-hore", "general"] {
        let a = std::fs::read(tmp.path().join(format!("a/{theory}.csv"))).unwrap();
        let b = std::fs::read(tmp.path().join(format!("b/{theory}.csv"))).unwrap();
        assert_eq!(a, b, "{theory}");
    }
    let summary: RunSummary = read_json(&tmp.path().join("a/summary.json"));
    let mut echoed = summary.scenario;
    echoed.output.dir = "b".into();
    assert_eq!(echoed, Scenario::load(&tmp.path().join("b/scenario.toml")).unwrap());
}

#[test]
fn fig6_summary_bounds_general_energy_shift() {
    let tmp = TempDir::new().unwrap();
    let o = radpair(&["preset", "fig6", "--out", "f6", "--format", "json"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: RunSummary = read_json(&tmp.path().join("f6/summary.json"));
    let general = summary.theories.iter().find(|t| t.label == "general").unwrap();
    assert!(general.max_abs_delta_e_times_t <= 1.0);
    assert_eq!(summary.energy_unit.name, "J");
}

#[test]
fn mc_is_deterministic_per_seed() {
    let tmp = TempDir::new().unwrap();
    let mut s = preset("fig5").unwrap();
    let t = s.trajectory.as_mut().unwrap();
    t.n_realizations = 2000;
    t.update = radpair::NoReactionUpdate::Conditioned;
    let cfg = write_scenario(tmp.path(), "mc.toml", &s);
    let run = |out: &str, seed: &str| {
        let o = radpair(&["mc", &cfg, "--seed", seed, "--out", out], tmp.path());
        assert!(o.status.success(), "{}", stderr(&o));
        read_json::<McReport>(&tmp.path().join(format!("{out}/mc_summary.json")))
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    assert_eq!(a.counts, b.counts);
    assert_ne!(a.counts, c.counts);
    assert_eq!(a.ladder.len(), 20);
    let series = std::fs::read_to_string(tmp.path().join("a/mc_series.csv")).unwrap();
    assert_eq!(series.lines().next().unwrap(), "terms,partial_sum");
}

#[test]
fn preset_print_round_trips() {
    let tmp = TempDir::new().unwrap();
    for name in ["fig3", "fig5", "fig6"] {
        let o = radpair(&["preset", name, "--print"], tmp.path());
        assert!(o.status.success());
        let parsed: Scenario = toml::from_str(&String::from_utf8(o.stdout).unwrap()).unwrap();
        assert_eq!(parsed, preset(name).unwrap());
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let s = Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            s.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            s.build().unwrap();
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}
