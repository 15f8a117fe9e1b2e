//! Crate-wide error type. Variants are grouped by the stage that raises
//! them so callers can map failures to exit codes without string matching.

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),

    #[error("measure: {0}")]
    Measure(String),

    #[error("w2 needs two grid or two atomic measures; convert one side explicitly")]
    MixedMeasures,

    #[error("oracle accepts at most {limit} atoms per side, got {got}")]
    OracleSize { limit: usize, got: usize },

    #[error("potential: {0}")]
    Potential(String),

    #[error("functional: {0}")]
    Functional(String),

    #[error("negative density in cell {cell} after step {step}; time step too large")]
    NegativeDensity { step: usize, cell: usize },

    #[error("flow: {0}")]
    Flow(String),

    #[error("loja: {0}")]
    Loja(String),
}

pub type Result<T> = std::result::Result<T, Error>;
