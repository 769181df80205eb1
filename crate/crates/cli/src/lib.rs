//! Experiment harness for the convex reformulation of two-layer ReLU
//! networks: datasets, configuration and the convex-versus-SGD pipeline.

pub mod config;
pub mod data;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig, ModelKind, PatternSource};
pub use data::{dataset_2d_synthetic, dataset_paper_1d, load_csv, DataError, SyntheticKind};
pub use experiment::{run_experiment, run_pipeline, Pipeline, RunError, RunReport, Stage};
