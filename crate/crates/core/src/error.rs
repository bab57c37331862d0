use thiserror::Error;

/// Failures raised by the simulation and probe routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration is not simple: points {0} and {1} coincide")]
    NonSimpleConfiguration(usize, usize),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("particle at distance {gap:e} from a neighbour, below the collision tolerance")]
    CollisionTooClose { gap: f64 },
    #[error("interaction sum did not settle: gap {gap:e} exceeds threshold {threshold:e}")]
    NonConvergentSum { gap: f64, threshold: f64 },
    #[error("MCMC acceptance rate {rate:.3} outside [0.1, 0.7] after tuning")]
    McmcNotMixed { rate: f64 },
    #[error("numerical collision at t={time}: gap {gap:e} below abort threshold")]
    CollisionAbort { time: f64, gap: f64 },
    #[error("particle {particle} left the domain at t={time}")]
    DomainViolation { time: f64, particle: usize },
    #[error("coarsening factor {factor} does not divide {steps} steps")]
    IndivisibleFactor { factor: usize, steps: usize },
    #[error("ensemble of size {got} too small, need at least {needed}")]
    InsufficientEnsemble { needed: usize, got: usize },
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
    #[error("sampled pair distance {0:e} below tolerance")]
    DegeneratePair(f64),
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),
    #[error("report schema mismatch: {0}")]
    SchemaMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
