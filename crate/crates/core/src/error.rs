use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqError {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("query value {value} at index {index} outside declared range {range}")]
    RangeViolation { index: usize, value: f64, range: &'static str },
    #[error("support violation at domain index {0}: distribution has mass where the reference has none")]
    SupportViolation(usize),
    #[error("size guard `{guard}` exceeded: {actual} > {limit}")]
    GuardExceeded { guard: &'static str, actual: usize, limit: usize },
    #[error("LP infeasible")]
    Infeasible,
    #[error("LP unbounded")]
    Unbounded,
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("distribution {index} cannot be covered at tolerance {tau}")]
    Uncoverable { index: usize, tau: f64 },
    #[error("distributions {indices:?} cannot be covered at tolerance {tau}")]
    UncoverableSet { indices: Vec<usize>, tau: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("oracle error: {0}")]
    Oracle(String),
    #[error("unsupported oracle bridge from {from} to {to}")]
    UnsupportedBridge { from: String, to: String },
    #[error("proved bound violated: {0}")]
    TheoremViolation(String),
    #[error("sample stream exhausted after {0} samples")]
    StreamExhausted(u64),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, SqError>;
