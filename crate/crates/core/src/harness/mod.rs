//! Experiment configuration, built-in suites, run records and the commands
//! behind the `bfrate` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod run;
pub mod suites;

pub use commands::{cmd_check, cmd_kl, cmd_marginal, cmd_simulate, cmd_trajectory, CommandOutcome};
pub use config::ExperimentConfig;
pub use run::{RunRecord, RunStatus};
