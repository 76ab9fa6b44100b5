//! Command-line front end: configuration layering, dispatch and output artifacts.

mod config;
pub mod curvefile;
mod run;

pub use config::{parse_config, parse_config_with_env, BarrierJob, BarrierName, CliConfig, Command, Geometry, ScenarioJob, ScenarioName, ShapeName, THREADS_ENV};
pub use run::{execute, Outcome};

/// Version of every JSON and CSV artifact layout.
pub const FORMAT_VERSION: u32 = 1;

/// Column order of `curvature.csv`.
pub const CURVATURE_COLUMNS: [&str; 6] = ["front_id", "node_index", "x", "y", "H_s", "error_estimate"];
/// Column order of `barrier-strip-positivity.csv`.
pub const STRIP_COLUMNS: [&str; 4] = ["t", "H_s", "error_estimate", "classical_curvature"];

pub mod exit {
    pub const OK: u8 = 0;
    pub const NOT_REPRODUCED: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Argument syntax, including `--help` and `--version` requests.
    #[error("{0}")]
    Clap(clap::Error),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => exit::OK,
            CliError::Clap(_) | CliError::Usage(_) => exit::USAGE,
            CliError::Numerical(_) | CliError::Output(_) => exit::NUMERICAL,
        }
    }
}

impl From<fmcf_core::Error> for CliError {
    fn from(e: fmcf_core::Error) -> Self {
        use fmcf_core::Error as E;
        match e {
            E::Domain(_) | E::Geometry(_) | E::TooSmall { .. } => CliError::Usage(e.to_string()),
            E::Io(_) | E::Json(_) => CliError::Output(e.to_string()),
            E::Accuracy { .. } | E::Infeasible(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
