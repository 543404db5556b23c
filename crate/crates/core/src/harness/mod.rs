//! Experiment harness: configuration, benchmark construction, sweeps and
//! the command-line self test.

pub mod benchmark;
pub mod config;
pub mod selftest;
pub mod sweep;

pub use benchmark::{build_benchmark, build_scene, initial_condition, intermediate_mask};
pub use config::{ExperimentConfig, SweepAxis};
pub use sweep::{run_sweep, SweepReport, SweepRow};
