use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("gap ratio r_{index} = {value} is outside (0, 1)")]
    RatioOutOfRange { index: usize, value: String },

    #[error("endpoint precision needs {needed_bits} bits, budget is {budget_bits}")]
    PrecisionBudget { needed_bits: u64, budget_bits: u64 },

    #[error("window does not contain the set")]
    WindowTooSmall,

    #[error("gap ratio series does not converge (partial sums still moving after {terms} terms)")]
    DivergentSeries { terms: usize },

    #[error("depth {depth} too shallow: l_depth = {l_depth:e} must be below min(L)/16 = {limit:e}")]
    InsufficientDepth { depth: usize, l_depth: f64, limit: f64 },

    #[error("not exponentially thick at scale L = {scale}: theta = 0")]
    NotExponentiallyThick { scale: String },

    #[error("theta at model boundary: samples with theta = 1 cannot be fitted")]
    ModelBoundary,

    #[error("need at least {needed} usable samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("lambda values must span at least two decades (got ratio {ratio:.3})")]
    InsufficientSpan { ratio: f64 },

    #[error("band for lambda = {lambda} is empty")]
    EmptyBand { lambda: f64 },

    #[error("resolution failure at lambda = {lambda}: d = {value:e} is below the working-precision floor")]
    Resolution { lambda: f64, value: f64 },

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("form is not positive definite at working precision: {0}")]
    NotPositiveDefinite(String),

    #[error("exterior decay not validated for h = {h}")]
    DecayNotValidated { h: f64 },

    #[error("fit failed: {0}")]
    FitFailed(String),
}

impl Error {
    /// Failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PrecisionBudget { .. }
                | Error::Resolution { .. }
                | Error::EigenSolver(_)
                | Error::NotPositiveDefinite(_)
                | Error::FitFailed(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
