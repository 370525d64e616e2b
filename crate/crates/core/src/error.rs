//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Expression syntax error, with the byte offset into the source text.
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },

    /// Identifier that is neither a declared coordinate nor a known function.
    #[error("unknown identifier `{name}` at byte {offset} (not a coordinate or function)")]
    UnknownIdentifier { name: String, offset: usize },

    /// Malformed chart file.
    #[error("chart `{file}` line {line}: {message}")]
    ChartFormat {
        file: String,
        line: usize,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A function was evaluated outside its domain (log of a non-positive
    /// value, division by zero, ...). `context` names the offending
    /// expression when known.
    #[error("domain error in {context}: {message} (value {value})")]
    Domain {
        context: String,
        message: String,
        value: f64,
    },

    /// The metric matrix failed the positive-definiteness check.
    #[error(
        "metric not positive definite at {point:?}: smallest eigenvalue {smallest_eigenvalue:e}"
    )]
    NotPositiveDefinite {
        point: Vec<f64>,
        smallest_eigenvalue: f64,
    },

    /// A point lies outside a declared coordinate interval.
    #[error("coordinate `{coord}` = {value} outside declared domain ({lo}, {hi})")]
    OutsideDomain {
        coord: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// Singular value-part in a jet-valued matrix inversion.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// Mismatched dimensions, slot counts, or jet orders.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A jet of order 0 cannot be differentiated further.
    #[error("jet order exhausted: {0}")]
    OrderExhausted(String),

    /// The filtration failed to stabilize below the hard iteration cap,
    /// which signals a tolerance problem rather than a mathematical one.
    #[error("no stabilization up to level {cap} (dimension sequence {dims:?}); \
             check rank tolerance against the metric's scale")]
    NoStabilization { cap: usize, dims: Vec<usize> },

    /// A parallel transport drifted off the skew-symmetry constraint,
    /// usually a sign of too few integration steps.
    #[error("transported endomorphism drifted off so(TM): skewness defect {defect:e} (increase step count)")]
    TransportDrift { defect: f64 },

    /// Generic precondition violation on a public operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for errors caused by unparseable or ill-formed input rather
    /// than by the geometry of the metric.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownIdentifier { .. }
                | Error::ChartFormat { .. }
                | Error::Io(_)
                | Error::InvalidArgument(_)
        )
    }
}
