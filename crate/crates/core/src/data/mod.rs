//! Data generation, ingestion, metrics and experiment orchestration.

pub mod config;
mod experiment;
mod metrics;
pub mod ppm;
mod synth;

pub use config::{parse_key_values, DataSource, ExperimentConfig, ModeCount};
pub use experiment::{
    load_data, report_without_timing, run_experiment, run_experiment_with_estimate, sample_dense,
    split_observed, CellReport, DataSummary, ExperimentData, ExperimentReport,
};
pub use metrics::{rmse, rmse_dense, rmse_factored};
pub use ppm::{export_ppm, ingest_ppm, parse_ppm, ppm_to_tensor, write_ppm, PpmImage};
pub use synth::{synth_generate, ObsRule, SynthData, SynthSpec};
