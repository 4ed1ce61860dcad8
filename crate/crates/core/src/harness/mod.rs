//! Experiment plumbing: configuration, the end-to-end runner and sweeps.

pub mod config;
pub mod experiment;
pub mod sweep;

pub use config::{ExperimentConfig, PacketSource, RateSweepConfig, RoiMode};
pub use experiment::{run_experiment, run_seed, ExperimentResult, RunOutcome, Summary};
pub use sweep::{frequency_response, sweep, SweepParameter, SweepTable};
