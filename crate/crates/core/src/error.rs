use thiserror::Error;

/// Errors raised by the solver stack.
///
/// Every variant names the structural invariant or modelling assumption that
/// was violated so that the CLI can report it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("strong convexity violated: lambda_min(Q) = {0:e} <= 0 (Q must be positive definite)")]
    NotStronglyConvex(f64),

    #[error("box invariant violated at coordinate {index}: lb = {lb} > ub = {ub}")]
    InvalidBox { index: usize, lb: f64, ub: f64 },

    #[error("constraint row {index}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidConstraintBounds { index: usize, lower: f64, upper: f64 },

    #[error("constraint row {0} is vacuous: both bounds are infinite")]
    VacuousConstraint(usize),

    #[error("dual feasibility broken: multiplier {index} = {value} is negative")]
    NegativeMultiplier { index: usize, value: f64 },

    #[error("{what} unavailable: requires a compact box (finite primal diameter)")]
    RequiresCompactBox { what: &'static str },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("inner solver exhausted {iterations} iterations without certifying accuracy {delta:e} (last bound {bound:e})")]
    InnerNotCertified {
        iterations: usize,
        delta: f64,
        bound: f64,
    },

    #[error("outer iteration {iteration}: {source}")]
    AtOuterIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("closed-loop step {step}: {source}")]
    AtSimulationStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("oracle: {0}")]
    Oracle(String),

    #[error("io: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
