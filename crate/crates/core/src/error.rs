use thiserror::Error;

/// Crate-wide error type.  Every failure carries enough context to act on;
/// none of them silently degrades a result.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("zero denominator in rational literal {literal:?}")]
    ZeroDenominator { literal: String },

    #[error("malformed rational literal {literal:?}")]
    BadRational { literal: String },

    #[error("linear program exceeds the size ceiling: {vars} variables / {rows} constraints (limit {limit})")]
    LpTooLarge { vars: usize, rows: usize, limit: usize },

    #[error("degenerate ball: {0}")]
    DegenerateBall(String),

    #[error("dimension {dim} exceeds the {what} ceiling {limit}")]
    CeilingExceeded {
        what: &'static str,
        dim: usize,
        limit: usize,
    },

    #[error("label collision: {0}")]
    LabelCollision(String),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("label map is not injective (labels {a:?} and {b:?} share an image)")]
    NotInjective { a: String, b: String },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("morphism is not an isometry: {0}")]
    NotIsometry(String),

    #[error("amalgamation precondition failed: {0}")]
    AmalgamPrecondition(String),

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("no rational with denominator within {bound} fits the gap ({lo}, {hi}); widen the bound")]
    SandwichInfeasible {
        lo: String,
        hi: String,
        bound: String,
    },

    #[error("interval ({lo}, {hi}) is empty")]
    EmptyInterval { lo: String, hi: String },

    #[error("construction postcondition violated: {0}")]
    ConstructionViolated(String),

    #[error("chain is frozen and too short: {0}")]
    ChainStuck(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub(crate) type Result<T> = std::result::Result<T, Error>;
