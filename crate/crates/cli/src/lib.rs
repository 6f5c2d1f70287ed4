//! Scenario harness around `modalsim-core`: configuration parsing, seeded
//! deterministic runs, and plot-ready data emission with a checksummed
//! manifest.

pub mod config;
pub mod emit;
pub mod scenarios;

pub use config::{parse_config, ScenarioConfig, Violation};

/// Harness-level error. Exit codes: 0 success, 1 acceptance failure,
/// 2 configuration error, 3 numerical failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration invalid:\n{}", format_violations(.0))]
    Config(Vec<Violation>),
    #[error("numerical failure in {scenario}: {source}")]
    Numerical {
        scenario: &'static str,
        source: modalsim_core::Error,
    },
    #[error("tolerance check failed: {0}")]
    Acceptance(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Acceptance(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            // treat i/o problems as configuration problems (bad paths)
            CliError::Io { .. } => 2,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  - {x}")).collect::<Vec<_>>().join("\n")
}

pub type CliResult<T> = std::result::Result<T, CliError>;
