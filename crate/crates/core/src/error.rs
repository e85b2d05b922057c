use thiserror::Error;

/// Errors produced by the completability library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Exhaustive enumeration refused; `suggestion` names the scalable alternative.
    #[error("{columns} columns exceed the exhaustive cap of {cap}; use {suggestion}")]
    CapExceeded {
        columns: usize,
        cap: usize,
        suggestion: &'static str,
    },

    /// Too few informative columns for the requested check.
    #[error("structural failure: {0}")]
    Structural(String),

    /// The drawn generic basis produced a restriction whose kernel is not one-dimensional.
    #[error("degenerate restriction on column {column}; redraw the generic basis")]
    RedrawRequired { column: usize },

    #[error("floating-point rank is ambiguous (gap ratio {gap:.3e}); rerun in exact mode")]
    Indeterminate { gap: f64 },

    #[error("degenerate subspace: {0}")]
    DegenerateSubspace(String),

    #[error("linear system is rank deficient ({rank} < {unknowns}); infinitely many solutions")]
    Underdetermined { rank: usize, unknowns: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
