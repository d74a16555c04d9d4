//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model evaluation, solvers, estimators, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter or argument failed validation.
    #[error("validation: {0}")]
    Validation(String),

    /// An argument lies outside the mathematical domain of the function.
    #[error("domain: {0}")]
    Domain(String),

    /// The gamma-subordinator Lévy tail diverges at 0 (infinite activity).
    #[error("gamma Lévy tail diverges at x = 0 (infinite activity)")]
    GammaInfiniteActivity,

    /// The net profit condition c > m fails.
    #[error("net profit condition violated: c = {c} must exceed mean claim rate m = {m}")]
    NpcViolated { c: f64, m: f64 },

    /// The net profit condition fails at the *estimated* parameters.
    #[error("net profit condition violated at the estimated parameters: c = {c}, m = {m}")]
    NpcViolatedAtEstimate { c: f64, m: f64 },

    /// No root of the target function exists inside the search bracket.
    #[error("no root in bracket ({lo}, {hi}): {context}")]
    NoRoot { lo: f64, hi: f64, context: String },

    /// The derivative in a variance denominator is numerically zero.
    #[error("degenerate denominator: |kappa'(gamma)| = {value} below tolerance")]
    DegenerateDenominator { value: f64 },

    /// The exponential moment required by the Cramér constant diverges.
    #[error("moment integral diverges: gamma = {gamma} >= pole = {pole}")]
    MomentDiverges { gamma: f64, pole: f64 },

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: estimated error {err} > tolerance {tol}")]
    QuadratureFail { err: f64, tol: f64 },

    /// The delta-method quadratic form came out negative beyond rounding.
    #[error("quadratic form is negative ({value}); covariance matrix not PSD")]
    NegativeQuadForm { value: f64 },

    /// The renewal grid step is too coarse for the requested horizon.
    #[error("grid step {step} too coarse for u_max {u_max} (need step <= u_max/100)")]
    StepTooCoarse { step: f64, u_max: f64 },

    /// Too few observations for the requested estimator.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Grid observations are required but absent or degenerate.
    #[error("missing or degenerate surplus grid: {0}")]
    MissingGrid(String),

    /// A zero jump threshold was requested for an infinite-activity model.
    #[error("jump threshold must be > 0 for the gamma subordinator")]
    EpsilonZero,

    /// File or format error while reading/writing observation sets.
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for errors caused by invalid user input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Io(_) | Error::EpsilonZero | Error::StepTooCoarse { .. }
        )
    }
}
