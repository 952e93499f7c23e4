//! Experiment configuration, metrics and the end-to-end commands behind the CLI.

mod commands;
mod config;
mod metrics;

pub use commands::{
    cmd_estimate, cmd_evaluate, cmd_fit_static, cmd_identify, cmd_simulate, estimate, extract_steady_points,
    fit_static, identify, read_channel, run_simulation, synthesize_validation, Estimation, Identification,
    Manifest, SimulationRun, StaticMap,
};
pub use config::{ExperimentConfig, IdentifyConfig};
pub use metrics::{MetricsReport, Quantity};
