// `!(x > 0.0)` guards stay as written: unlike `x <= 0.0` they also catch NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Experiment orchestration for the kpde solver: configuration ingestion,
//! preset experiments, the run pipeline, and result persistence.

pub mod config;
pub mod experiment;
pub mod output;
pub mod report;

pub use config::{load_config, preset_config, ExperimentConfig};
pub use experiment::run_experiment;
pub use report::RunReport;

/// Exit code contract: 0 all-pass, 1 check failure, 2 configuration error,
/// 3 runtime/numerical error.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<kpde_core::Error> for CliError {
    fn from(e: kpde_core::Error) -> Self {
        match e {
            kpde_core::Error::InvalidArgument(_)
            | kpde_core::Error::DimensionMismatch(_)
            | kpde_core::Error::Unsupported(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O: {e}"))
    }
}
