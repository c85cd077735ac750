use thiserror::Error;

/// Failures raised by the numerical engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a valid density matrix: {0}")]
    InvalidState(String),

    #[error("beta*cutoff/(2*pi) = {ratio} is too close to an integer; perturb beta")]
    MatsubaraPole { ratio: f64 },

    #[error("Matsubara series did not converge within {terms} terms")]
    SeriesCap { terms: usize },

    #[error("quadrature did not reach tolerance: estimate {value:e}, error {error:e}")]
    Quadrature { value: f64, error: f64 },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("trace drifted to {trace} at t = {t}")]
    TraceDrift { t: f64, trace: f64 },

    #[error("time {t} lies outside the coefficient grid [{start}, {end}]")]
    OutsideGrid { t: f64, start: f64, end: f64 },

    #[error("time grid too coarse: step {step} exceeds {limit}")]
    GridTooCoarse { step: f64, limit: f64 },

    #[error("trajectory grids do not match")]
    GridMismatch,

    #[error("steady state is not unique (degenerate null space)")]
    DegenerateNullspace,

    #[error("long-time integration did not converge: d = {distance:e}")]
    NotConverged { distance: f64 },

    #[error("bracket [{lo}, {hi}] does not straddle the tolerance")]
    Bracket { lo: f64, hi: f64 },

    #[error("generator has no matrix form")]
    NoMatrixForm,

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
