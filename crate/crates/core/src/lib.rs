//! Density-matrix dynamics of spin-selective radical-ion-pair reactions.
//!
//! The crate compares four evolution laws for the spin density matrix of a
//! radical-ion pair that recombines through singlet and triplet channels:
//! the traditional phenomenological equation, the Jones–Hore equation, the
//! decoherence-plus-particle-number pair (`KominisPair`), and the general equation
//! that interpolates between whole-state and block-wise removal using the
//! singlet–triplet coherence p_coh.
//!
//! Modules, bottom-up:
//!
//! - [`spin`]: operators, projectors and basis states on the 4n-dimensional space
//! - [`hamiltonian`]: exchange, hyperfine and Zeeman terms
//! - [`master`]: the four right-hand sides and the coherence measure
//! - [`integrator`]: fixed-step RK4 with yield bookkeeping
//! - [`observables`]: sampled populations, coherence and ΔE(t)
//! - [`trajectory`]: single-molecule branching and ensemble statistics

pub mod error;
pub mod hamiltonian;
pub mod integrator;
pub mod master;
pub mod observables;
pub mod spin;
pub mod trajectory;

pub use error::{Error, Result};
pub use hamiltonian::{assemble, HamiltonianSpec, HyperfineTerm};
pub use integrator::{evolve, Evolution, IntegratorConfig, Warning};
pub use master::{CoherenceMode, MasterEquation, RateSpec, TheoryKind};
pub use observables::{EnergyUnit, TimeSeriesRecord};
pub use spin::{DensityOperator, Operator, Projectors, SpinSystem, C64};
pub use trajectory::{
    CoherenceMap, EnsembleResult, Fate, NoReactionUpdate, RemovalRule, TrajectoryConfig, TrajectorySimulator,
};
