use crate::clifford::Multivector;

/// Crate-wide error type. Numerical routines return structured variants so
/// callers can distinguish bad input from budget exhaustion mid-computation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("surface construction would allocate {requested} rectangles (budget {budget})")]
    RectangleBudget { requested: u128, budget: u128 },

    #[error("evaluation at a singular point: {0}")]
    Singular(String),

    #[error(
        "quadrature subdivision budget exhausted after {nodes} nodes; partial value retained"
    )]
    QuadratureBudget {
        nodes: usize,
        partial: Box<Multivector>,
    },

    #[error("solvability condition fails: nu = {nu:.6} requires nu > {threshold:.6}")]
    NotSolvable { nu: f64, threshold: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
