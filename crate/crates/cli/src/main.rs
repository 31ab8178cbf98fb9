use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radpair::CoherenceMode;
use radpair_cli::{presets, report, CliError, CliResult, OutputFormat, Overrides, Scenario};

#[derive(Debug, Parser)]
#[command(name = "radpair", version, about = "Radical-ion-pair spin dynamics under competing master equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step; applies to the trajectory section for `mc`.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Horizon; for `mc` it sets max_steps = t_max/dt.
    #[arg(long, global = true)]
    t_max: Option<f64>,
    #[arg(long, global = true, value_parser = parse_mode)]
    coherence_mode: Option<CoherenceMode>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Output directory, overriding the scenario's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate every theory of a scenario.
    Run { config: PathBuf },
    /// Run a built-in scenario (fig3, fig5, fig6).
    Preset {
        name: String,
        /// Print the scenario as TOML instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Run and tabulate pairwise differences between theories.
    Compare { config: PathBuf },
    /// Single-molecule Monte Carlo ensemble.
    Mc { config: PathBuf },
}

fn parse_mode(s: &str) -> Result<CoherenceMode, String> {
    s.parse().map_err(|e: radpair::Error| e.to_string())
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            dt: self.dt,
            t_max: self.t_max,
            coherence_mode: self.coherence_mode,
            format: self.format,
            out: self.out.clone(),
        }
    }
}

fn load(path: &Path, o: &Overrides, trajectory_run: bool) -> CliResult<Scenario> {
    let mut s = Scenario::load(path)?;
    s.apply(o, trajectory_run)?;
    Ok(s)
}

fn list(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn execute(cli: &Cli) -> CliResult<()> {
    let o = cli.overrides();
    match &cli.command {
        Command::Run { config } => {
            let (summary, files) = report::run(&load(config, &o, false)?)?;
            report::print_summary(&summary);
            list(&files);
        }
        Command::Compare { config } => {
            let (r, files) = report::compare(&load(config, &o, false)?)?;
            report::print_compare(&r);
            list(&files);
        }
        Command::Mc { config } => {
            let (r, files) = report::monte_carlo(&load(config, &o, true)?)?;
            report::print_mc(&r);
            list(&files);
        }
        Command::Preset { name, print } => {
            let mut s = presets::preset(name)?;
            let trajectory_run = s.trajectory.is_some();
            s.apply(&o, trajectory_run)?;
            if *print {
                print!("{}", s.to_toml());
            } else if trajectory_run {
                let (r, files) = report::monte_carlo(&s)?;
                report::print_mc(&r);
                list(&files);
            } else {
                let (summary, files) = report::run(&s)?;
                report::print_summary(&summary);
                list(&files);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("radpair: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CliError) -> u8 {
    e.exit_code() as u8
}
