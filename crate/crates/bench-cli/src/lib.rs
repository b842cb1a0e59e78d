//! Experiment harness for the SWIPT power-minimization solvers.
//!
//! A run is described by an [`ExperimentPlan`] read from a flat
//! `key = value` file plus command-line overrides. [`run::run_sweep`]
//! averages transmit power over channel realizations for each value of a QoS
//! target, [`run::run_convergence`] records SCA traces, and
//! [`run::run_certification`] checks SCA against the grid oracle.

pub mod error;
pub mod plan;
pub mod run;

pub use error::BenchError;
pub use plan::{load_plan, parse_config, ExperimentPlan, Solver, SweepParam};
