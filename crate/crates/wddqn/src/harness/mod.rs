//! Experiment orchestration: configuration files, seeded runs of both
//! games, metric computation, CSV emission, run comparison, and the quick
//! oracle battery behind `check`.

use thiserror::Error;

pub mod checks;
pub mod compare;
pub mod config;
pub mod metrics;
pub mod runner;

pub use checks::{run_checks, CheckResult};
pub use compare::compare;
pub use config::{load_config, parse_config, AgentKind, ConfigError, EnvSpec, ExperimentConfig};
pub use metrics::{efficiency_ratio, rolling_metrics, WindowStats};
pub use runner::{
    reference_lines, render_episodes_csv, render_summary_csv, run, EpisodeRecord, RunResult,
    RunSummary, SUMMARY_WINDOW,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("environment error: {0}")]
    Env(crate::env::EnvError),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("compare needs at least one input directory")]
    NoInputs,
    #[error("runs come from different environments: {0} vs {1}")]
    EnvMismatch(String, String),
    #[error("malformed {file}: {msg}")]
    BadInput { file: String, msg: String },
}
