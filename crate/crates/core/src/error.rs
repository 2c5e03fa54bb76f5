use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("space document is malformed: {0}")]
    Document(String),

    #[error("triangle violation ({a},{b},{c}): d({a},{c})={ac} > d({a},{b})+d({b},{c})={via}")]
    TriangleViolation {
        a: String,
        b: String,
        c: String,
        ac: f64,
        via: f64,
    },

    #[error("asymmetric distance matrix at ({0},{1})")]
    Asymmetric(String, String),

    #[error("invalid distance at ({0},{1}): {2}")]
    InvalidDistance(String, String, String),

    #[error("weight of point {0} must be finite and strictly positive, got {1}")]
    NonPositiveWeight(String, f64),

    #[error("restriction to an empty subset")]
    EmptySubset,

    #[error("unknown point {0}")]
    UnknownPoint(String),

    #[error("ball radius must be finite and strictly positive, got {0}")]
    InvalidRadius(f64),

    #[error("function has {got} values but the space has {expected} points")]
    FunctionLength { expected: usize, got: usize },

    #[error("function value at {0} is not finite")]
    NonFiniteValue(usize),

    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("kernel precondition violated: {0}")]
    KernelPrecondition(String),

    #[error("space is not measure doubling at the required level: C_mu = {c_mu} exceeds {limit}")]
    NotDoubling { c_mu: f64, limit: f64 },

    #[error("linear program failed: {0}")]
    Solver(String),

    #[error("no stopping ball found for point {point} above threshold (L = {l})")]
    NoStoppingBall { point: usize, l: f64 },
}
