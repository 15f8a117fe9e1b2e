//! Experiment runner around `wloja-core`: JSON configs in, CSV/SVG/JSON
//! artifacts out. The binary in `main.rs` is a thin argument parser over
//! [`runner`]; everything else lives here so it can be driven from tests.

pub mod config;
pub mod runner;
pub mod samples;
pub mod svg;

/// Failure classes map one-to-one onto exit codes: configuration problems
/// (including I/O on config files and output directories) exit 2, numerical
/// failures during a run exit 3. Check failures are not errors — the run
/// completes and exits 1.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),

    #[error("numerical: {0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
