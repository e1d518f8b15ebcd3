use thiserror::Error;

/// Failures raised by the simulator.
///
/// Variants split into two categories: configuration errors (bad input that
/// the caller can fix) and numerical failures (a valid input the solvers could
/// not handle). See [`Error::is_config`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("generator is singular: no unique steady state (residual {residual:e})")]
    SingularGenerator { residual: f64 },

    #[error("step too large: {0}")]
    StepTooLarge(String),

    #[error("degenerate denominator |Z| = {0:e}")]
    DegenerateDenominator(f64),

    #[error("entry probe amplitude is zero")]
    ZeroEntryField,

    #[error("degenerate spectrum: peak heights sum to {0:e}")]
    DegenerateSpectrum(f64),

    #[error("calibration curve not strictly increasing between dp = {left} and dp = {right}")]
    NonMonotoneCurve { left: f64, right: f64 },

    #[error("dp' = {value} outside calibration range [{low}, {high}]")]
    OutOfRange { value: f64, low: f64, high: f64 },

    #[error("quadrature not converged: relative change {0:e} on doubling nodes")]
    QuadratureNotConverged(f64),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical trouble.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::OutOfRange { .. })
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
