//! Closed-loop simulation harness for the adaptive stochastic MPC library:
//! scenario files, seeded disturbances, single runs, Monte Carlo batches
//! with paired controller comparison, and CSV / TOML export.

// `!(x > 0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod disturbance;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod run;

pub use config::{Mode, Scenario, ScenarioConfig};
pub use error::SimError;
pub use montecarlo::{run_monte_carlo, MonteCarloSummary};
pub use run::{run_closed_loop, run_estimate_only, RunTrace, StepRecord};
