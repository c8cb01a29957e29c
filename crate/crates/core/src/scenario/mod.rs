//! Scenario configs, orchestration, and reports.

pub mod config;
pub mod report;
mod runner;

pub use config::{parse_config, ConfigError, OutputFormat, ScenarioConfig};
pub use report::{write_report, MetricsReport};
pub use runner::{
    run_scenario, run_trials, sweep_learning_rate, ScenarioError, COMMAND_TOPIC, FRAME_TOPIC,
    TELEMETRY_TOPIC,
};
