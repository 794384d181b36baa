//! Configuration-driven experiment runner for `displab`.

pub mod config;
pub mod run;
pub mod suite;

pub use config::{Experiment, ExperimentConfig, Manifest, Overrides};
pub use run::{run, Report, Verdict};
