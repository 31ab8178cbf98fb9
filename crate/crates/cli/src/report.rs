//! Executes scenarios and writes time series, summaries and ensemble reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use radpair::trajectory::{FateCounts, Rung};
use radpair::{evolve, EnergyUnit, Evolution, Fate, TheoryKind, TimeSeriesRecord, Warning};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::scenario::{Built, Scenario};

pub const TOOL: &str = "radpair";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Warnings of one kind beyond this count are summarized rather than listed.
const WARNING_LIMIT: usize = 20;

#[derive(Debug, Clone)]
pub struct TheoryRun {
    /// File stem; repeated theories get a numeric suffix.
    pub label: String,
    pub evolution: Evolution,
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheorySummary {
    pub label: String,
    pub theory: TheoryKind,
    pub dt: f64,
    pub steps: usize,
    pub samples: usize,
    pub final_yield_s: f64,
    pub final_yield_t: f64,
    pub survivor_trace: f64,
    pub max_abs_delta_e_times_t: f64,
    pub max_closure_defect: f64,
    pub min_eigenvalue: f64,
    pub max_hermiticity_defect: f64,
    pub depleted: bool,
    pub warnings: Vec<Warning>,
    pub suppressed_warnings: usize,
    pub runtime_seconds: f64,
}

impl TheorySummary {
    pub fn of(run: &TheoryRun) -> Self {
        let e = &run.evolution;
        let last = e.last();
        let shown = e.warnings.len().min(WARNING_LIMIT);
        TheorySummary {
            label: run.label.clone(),
            theory: e.theory,
            dt: e.dt,
            steps: e.steps,
            samples: e.records.len(),
            final_yield_s: last.yield_s,
            final_yield_t: last.yield_t,
            survivor_trace: last.trace,
            max_abs_delta_e_times_t: e.max_abs_delta_e_times_t(),
            max_closure_defect: e.max_closure_defect(),
            min_eigenvalue: e.min_eigenvalue(),
            max_hermiticity_defect: e.max_hermiticity_defect(),
            depleted: e.depleted(),
            warnings: e.warnings[..shown].to_vec(),
            suppressed_warnings: e.warnings.len() - shown,
            runtime_seconds: run.runtime_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool: String,
    pub version: String,
    pub energy_unit: EnergyUnit,
    pub runtime_seconds: f64,
    pub theories: Vec<TheorySummary>,
    pub scenario: Scenario,
}

fn labels(theories: &[TheoryKind]) -> Vec<String> {
    theories
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let seen = theories[..i].iter().filter(|u| *u == t).count();
            if seen == 0 {
                t.name().to_string()
            } else {
                format!("{}-{}", t.name(), seen + 1)
            }
        })
        .collect()
}

/// Integrates every theory of the scenario, concurrently, in scenario order.
pub fn run_theories(scenario: &Scenario) -> CliResult<(Built, Vec<TheoryRun>)> {
    let built = scenario.build()?;
    let labels = labels(&scenario.theories);
    let results: Vec<CliResult<TheoryRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenario
            .theories
            .iter()
            .zip(labels)
            .map(|(&theory, label)| {
                let built = &built;
                scope.spawn(move || {
                    let start = Instant::now();
                    let eq = scenario.equation(built, theory);
                    let evolution = evolve(&built.rho0, &eq, &scenario.integrator, built.unit.clone())
                        .map_err(|e| annotate(theory, e))?;
                    Ok(TheoryRun { label, evolution, runtime_seconds: start.elapsed().as_secs_f64() })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("theory worker panicked")).collect()
    });
    let runs = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    Ok((built, runs))
}

fn annotate(theory: TheoryKind, e: radpair::Error) -> CliError {
    match CliError::from(e) {
        CliError::Numerical(m) => CliError::Numerical(format!("{theory}: {m}")),
        CliError::Config(m) => CliError::Config(format!("{theory}: {m}")),
        other => other,
    }
}

pub fn summarize(scenario: &Scenario, built: &Built, runs: &[TheoryRun], runtime_seconds: f64) -> RunSummary {
    RunSummary {
        tool: TOOL.into(),
        version: VERSION.into(),
        energy_unit: built.unit.clone(),
        runtime_seconds,
        theories: runs.iter().map(TheorySummary::of).collect(),
        scenario: scenario.clone(),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

pub fn write_series(path: &Path, records: &[TimeSeriesRecord]) -> CliResult<()> {
    write_rows(path, records)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes to JSON");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn write_scenario(dir: &Path, scenario: &Scenario) -> CliResult<PathBuf> {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, scenario.to_toml()).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// Runs a scenario and writes `<theory>.csv`, `summary.json` and the effective `scenario.toml`.
pub fn run(scenario: &Scenario) -> CliResult<(RunSummary, Vec<PathBuf>)> {
    let start = Instant::now();
    let (built, runs) = run_theories(scenario)?;
    let summary = summarize(scenario, &built, &runs, start.elapsed().as_secs_f64());
    let files = write_run_outputs(scenario, &runs, &summary)?;
    Ok((summary, files))
}

fn write_run_outputs(scenario: &Scenario, runs: &[TheoryRun], summary: &RunSummary) -> CliResult<Vec<PathBuf>> {
    let dir = &scenario.output.dir;
    create_dir(dir)?;
    let mut files = vec![write_scenario(dir, scenario)?];
    if scenario.output.format.csv() {
        for r in runs {
            let path = dir.join(format!("{}.csv", r.label));
            write_series(&path, &r.evolution.records)?;
            files.push(path);
        }
    }
    if scenario.output.format.json() {
        let path = dir.join("summary.json");
        write_json(&path, summary)?;
        files.push(path);
    }
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDeviation {
    pub a: String,
    pub b: String,
    /// max_t |qs_abs(a) − qs_abs(b)|
    pub max_qs_abs_deviation: f64,
    pub final_yield_t_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub tool: String,
    pub version: String,
    pub theories: Vec<TheorySummary>,
    pub deviations: Vec<PairDeviation>,
    pub scenario: Scenario,
}

pub fn deviations(runs: &[TheoryRun]) -> Vec<PairDeviation> {
    let mut out = Vec::new();
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            let (ra, rb) = (&a.evolution.records, &b.evolution.records);
            let max = ra.iter().zip(rb).map(|(x, y)| (x.qs_abs - y.qs_abs).abs()).fold(0.0, f64::max);
            out.push(PairDeviation {
                a: a.label.clone(),
                b: b.label.clone(),
                max_qs_abs_deviation: max,
                final_yield_t_difference: a.evolution.last().yield_t - b.evolution.last().yield_t,
            });
        }
    }
    out
}

/// Runs like [`run`] and additionally writes `compare.json`.
pub fn compare(scenario: &Scenario) -> CliResult<(CompareReport, Vec<PathBuf>)> {
    if scenario.theories.len() < 2 {
        return Err(CliError::Config("theories: compare needs at least two theories".into()));
    }
    let start = Instant::now();
    let (built, runs) = run_theories(scenario)?;
    let summary = summarize(scenario, &built, &runs, start.elapsed().as_secs_f64());
    let mut files = write_run_outputs(scenario, &runs, &summary)?;
    let report = CompareReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        theories: summary.theories,
        deviations: deviations(&runs),
        scenario: scenario.clone(),
    };
    if scenario.output.format.json() {
        let path = scenario.output.dir.join("compare.json");
        write_json(&path, &report)?;
        files.push(path);
    }
    Ok((report, files))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FateFractions {
    pub singlet_product: f64,
    pub triplet_product: f64,
    pub survived: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub terms: usize,
    pub partial_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub tool: String,
    pub version: String,
    pub n_realizations: usize,
    pub counts: FateCounts,
    pub fractions: FateFractions,
    pub standard_errors: FateFractions,
    /// Triplet yield of the general master equation on the same scenario.
    pub reference_yield_t: f64,
    /// (triplet fraction − reference) / standard error; absent when the error is zero.
    pub z_score: Option<f64>,
    pub ladder: Vec<Rung>,
    /// Last partial sum of the yield series; absent when k_S ≠ 0.
    pub series_sum: Option<f64>,
    pub series_minus_reference: Option<f64>,
    pub runtime_seconds: f64,
    pub scenario: Scenario,
}

fn fractions(f: impl Fn(Fate) -> f64) -> FateFractions {
    FateFractions {
        singlet_product: f(Fate::SingletProduct),
        triplet_product: f(Fate::TripletProduct),
        survived: f(Fate::Survived),
    }
}

/// Monte Carlo ensemble plus ladder, yield series and master-equation reference.
pub fn monte_carlo(scenario: &Scenario) -> CliResult<(McReport, Vec<PathBuf>)> {
    let start = Instant::now();
    let built = scenario.build()?;
    let section = scenario.trajectory.clone().ok_or_else(|| CliError::Config("missing [trajectory] section".into()))?;
    let sim = scenario.simulator(&built)?;
    let ensemble = sim.run_ensemble(&built.rho0)?;
    let mut ladder = sim.rungs(&built.rho0)?;
    ladder.truncate(section.ladder_rows);
    let series = if scenario.rates.k_s == 0.0 { Some(sim.yield_series(&built.rho0, section.series_terms)?) } else { None };

    let eq = scenario.equation(&built, TheoryKind::General);
    let reference = evolve(&built.rho0, &eq, &scenario.integrator, built.unit.clone())
        .map_err(|e| annotate(TheoryKind::General, e))?
        .last()
        .yield_t;

    let f_t = ensemble.fraction(Fate::TripletProduct);
    let se_t = ensemble.standard_error(Fate::TripletProduct);
    let series_sum = series.as_ref().and_then(|s| s.last().copied());
    let report = McReport {
        tool: TOOL.into(),
        version: VERSION.into(),
        n_realizations: ensemble.n,
        counts: ensemble.counts,
        fractions: fractions(|f| ensemble.fraction(f)),
        standard_errors: fractions(|f| ensemble.standard_error(f)),
        reference_yield_t: reference,
        z_score: (se_t > 0.0).then(|| (f_t - reference) / se_t),
        ladder,
        series_sum,
        series_minus_reference: series_sum.map(|s| s - reference),
        runtime_seconds: start.elapsed().as_secs_f64(),
        scenario: scenario.clone(),
    };

    let dir = &scenario.output.dir;
    create_dir(dir)?;
    let mut files = vec![write_scenario(dir, scenario)?];
    if scenario.output.format.csv() {
        let path = dir.join("mc_ladder.csv");
        write_rows(&path, &report.ladder)?;
        files.push(path);
        if let Some(s) = &series {
            let rows: Vec<SeriesRow> =
                s.iter().enumerate().map(|(i, &partial_sum)| SeriesRow { terms: i + 1, partial_sum }).collect();
            let path = dir.join("mc_series.csv");
            write_rows(&path, &rows)?;
            files.push(path);
        }
    }
    if scenario.output.format.json() {
        let path = dir.join("mc_summary.json");
        write_json(&path, &report)?;
        files.push(path);
    }
    Ok((report, files))
}

pub fn print_summary(s: &RunSummary) {
    println!(
        "{:<16} {:>10} {:>10} {:>10} {:>14} {:>12}",
        "theory", "yield_S", "yield_T", "trace", "max|dE*t|", "closure"
    );
    for t in &s.theories {
        println!(
            "{:<16} {:>10.6} {:>10.6} {:>10.6} {:>14.6} {:>12.3e}",
            t.label, t.final_yield_s, t.final_yield_t, t.survivor_trace, t.max_abs_delta_e_times_t, t.max_closure_defect
        );
    }
    for t in &s.theories {
        if !t.warnings.is_empty() {
            println!("{}: {} warning(s), first: {:?}", t.label, t.warnings.len() + t.suppressed_warnings, t.warnings[0]);
        }
    }
    println!("runtime {:.3} s", s.runtime_seconds);
}

pub fn print_compare(r: &CompareReport) {
    println!("{:<16} {:<16} {:>18} {:>14}", "a", "b", "max|dqs_abs|", "dY_T");
    for d in &r.deviations {
        println!("{:<16} {:<16} {:>18.6e} {:>14.6}", d.a, d.b, d.max_qs_abs_deviation, d.final_yield_t_difference);
    }
}

pub fn print_mc(r: &McReport) {
    println!("realizations {}", r.n_realizations);
    println!(
        "singlet {:.5} ± {:.5}  triplet {:.5} ± {:.5}  survived {:.5} ± {:.5}",
        r.fractions.singlet_product,
        r.standard_errors.singlet_product,
        r.fractions.triplet_product,
        r.standard_errors.triplet_product,
        r.fractions.survived,
        r.standard_errors.survived
    );
    match r.z_score {
        Some(z) => println!("master-equation triplet yield {:.5}  (z = {z:.2})", r.reference_yield_t),
        None => println!("master-equation triplet yield {:.5}", r.reference_yield_t),
    }
    if let (Some(s), Some(d)) = (r.series_sum, r.series_minus_reference) {
        println!("yield series {s:.6}  (series − master equation = {d:+.6})");
    }
    println!("{:>5} {:>12} {:>12} {:>12}", "step", "p_singlet", "p_triplet", "p_coh");
    for rung in r.ladder.iter().take(6) {
        println!("{:>5} {:>12.6} {:>12.6} {:>12.6}", rung.step, rung.p_singlet, rung.p_triplet, rung.p_coh);
    }
    println!("runtime {:.3} s", r.runtime_seconds);
}
