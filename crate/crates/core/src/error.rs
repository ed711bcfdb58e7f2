use thiserror::Error;

/// Errors raised by the workbench.
///
/// The variants fall in three families that the command line maps onto exit
/// codes: usage problems, violations of the modelling assumptions on the
/// potential, and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported dimension {0} for this operation")]
    UnsupportedDimension(usize),

    #[error("eigen-solver did not converge (residual {residual:e})")]
    EigenNoConvergence { residual: f64 },

    #[error("degenerate critical point at {location:?}: smallest |eigenvalue| {min_abs_eigenvalue:e}")]
    DegenerateCriticalPoint { location: Vec<f64>, min_abs_eigenvalue: f64 },

    #[error("unequal saddle heights: {heights:?}")]
    UnequalSaddleHeights { heights: Vec<f64> },

    #[error("the closure of {{U < H}} is disconnected at H = {level}: {components} components")]
    Disconnected { level: f64, components: usize },

    #[error("no saddle separates two wells; cannot choose H")]
    NoSeparatingLevel,

    #[error("|S_star| < 2 (found {0} deepest well)")]
    SingleDeepestWell(usize),

    #[error("descent from {start:?} did not converge to a minimum within {steps} steps")]
    DescentFailed { start: Vec<f64>, steps: usize },

    #[error("saddle at {location:?} does not separate two wells (both sides reach well {well})")]
    NotSeparating { location: Vec<f64>, well: usize },

    #[error("critical point is not an index-1 saddle")]
    NotASaddle,

    #[error("well {0} has zero total rate (chain not irreducible)")]
    ZeroRate(usize),

    #[error("singular linear system")]
    Singular,

    #[error("too many states: {0} > {1}")]
    TooManyStates(usize, usize),

    #[error("invalid state set: {0}")]
    InvalidStateSet(String),

    #[error("negative beta entry beta[{i}][{j}] = {value:e}")]
    NegativeBeta { i: usize, j: usize, value: f64 },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("saddle boxes overlap at eps = {eps}; largest admissible eps is {max_eps}")]
    BoxesOverlap { eps: f64, max_eps: f64 },

    #[error("saddle box level check failed: min (U-H)/(J^2 delta^2) on side faces = {ratio}")]
    BoxLevel { ratio: f64 },

    #[error("compatibility violated: sum a(i) (L_y f)(i) mu(V_i) = {0:e}")]
    Compatibility(f64),

    #[error("trajectory diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String },

    #[error("sample too small: {got} < {min}")]
    SampleTooSmall { got: usize, min: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{failed} of {total} runs failed; first: {first}")]
    Batch { failed: usize, total: usize, first: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for violations of the standing assumptions on the potential
    /// (degenerate Hessian, unequal saddle heights, single deepest well).
    pub fn is_model_assumption(&self) -> bool {
        matches!(
            self,
            Error::DegenerateCriticalPoint { .. }
                | Error::UnequalSaddleHeights { .. }
                | Error::Disconnected { .. }
                | Error::NoSeparatingLevel
                | Error::SingleDeepestWell(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
