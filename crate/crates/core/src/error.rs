use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("structure violation: {identity} has residual {residual:.3e} (tol {tol:.3e})")]
    StructureViolation {
        identity: &'static str,
        residual: f64,
        tol: f64,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("eigendecomposition did not converge: residual {residual:.3e} exceeds {bound:.3e}")]
    ConvergenceFailure { residual: f64, bound: f64 },

    #[error("no gamma-symmetric projection exists: sign(i*gamma on ker A) = {signature}")]
    NoGammaSymmetricProjection { signature: i64 },

    #[error("commutation violation: {what} has residual {residual:.3e}")]
    CommutationViolation { what: &'static str, residual: f64 },

    #[error("structure has no grading operator omega")]
    MissingGrading,

    #[error("projection is not in commuting normal form: {0}")]
    NormalForm(String),

    #[error("inconsistent results: {what} ({left} vs {right})")]
    Inconsistent {
        what: &'static str,
        left: i64,
        right: i64,
    },

    #[error("spectral flow refinement budget of {budget} evaluations exceeded")]
    RefinementBudgetExceeded { budget: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid too coarse: Richardson estimate {estimate:.3e} exceeds tolerance {tol:.3e}")]
    GridTooCoarse { estimate: f64, tol: f64 },

    #[error("design matrix ill-conditioned: condition number {cond:.3e}")]
    IllConditioned { cond: f64 },

    #[error("insufficient samples: need {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("mode sum tail bound {bound:.3e} exceeds tolerance {tol:.3e}")]
    TailBoundViolated { bound: f64, tol: f64 },

    #[error("propagator tolerance {tol:.3e} unreachable within {steps} steps (estimate {estimate:.3e})")]
    ToleranceUnreachable { tol: f64, steps: usize, estimate: f64 },

    #[error("deformation family invariant violated: {what} has residual {residual:.3e}")]
    FamilyInvariantViolation { what: &'static str, residual: f64 },

    #[error("discretization failure: {0}")]
    DiscretizationFailure(String),

    #[error("infeasible request: {0}")]
    InfeasibleRequest(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
