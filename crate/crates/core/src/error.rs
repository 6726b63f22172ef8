use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} must be nonnegative, got {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid benefit function: {0}")]
    InvalidBenefit(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("argument {value} exceeds H(0) = {max}, outside the codomain of the aggregate marginal")]
    OutOfCodomain { value: f64, max: f64 },

    #[error("singular pool: total investment equals total perturbation")]
    SingularPool,

    #[error("infeasible regime: {0}")]
    InfeasibleRegime(String),

    #[error("active-set iteration did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("degenerate {which} bound: argument {argument} exceeds H(0) = {h0}")]
    DegenerateBound { which: &'static str, argument: f64, h0: f64 },

    #[error("LP solver failure: {0}")]
    SolverFailure(String),

    #[error("exactness violation: {0}")]
    ExactnessViolation(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("grid validation: {0}")]
    GridValidation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_nonneg(what: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
