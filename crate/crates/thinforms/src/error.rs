//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its admissible domain.
    #[error("parameter `{name}` = {value} violates `{constraint}`")]
    ParamDomain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// Generating functions are only evaluated inside the closed unit disc.
    #[error("generating-function argument {value} lies outside the unit disc")]
    OutsideUnitDisc { value: f64 },

    /// A distribution with no mass on its truncated support cannot be sampled.
    #[error("distribution `{label}` has no sampleable mass")]
    NoMass { label: String },

    /// A joint-law computation would allocate more cells than allowed.
    #[error("joint support of {cells} cells exceeds the capacity limit of {cap}")]
    Capacity { cells: usize, cap: usize },

    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate contingency table: {reason}")]
    DegenerateTable { reason: String },

    /// The scalar normalization solver could not bracket or confirm a root.
    #[error("normalization solver failed: {reason}")]
    SolverFailure { reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {reason}")]
    MalformedInput { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
