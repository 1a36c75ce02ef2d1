//! Configuration, experiment drivers, the verification battery and run manifests.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod verify;

pub use config::ExperimentConfig;
pub use experiments::{
    divergence_table, resonant_mean_study, run_convergence, run_divergence_demo, ConvergenceReport,
    DivergenceReport, ResonantMeanReport,
};
pub use manifest::{ManifestBuilder, RunManifest};
pub use verify::{run_verify, VerifyReport};
