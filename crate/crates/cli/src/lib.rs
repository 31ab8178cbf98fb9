//! Scenario-driven front end for the radical-pair master-equation library.
//!
//! A scenario is a TOML file naming the spin system, Hamiltonian, rates,
//! initial state, the theories to integrate and optional Monte Carlo
//! settings. [`report`] executes scenarios and writes CSV/JSON outputs.

pub mod error;
pub mod presets;
pub mod report;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use scenario::{OutputFormat, Overrides, Scenario};
