use std::fmt;

/// Failures raised by the library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("metric is singular or not positive definite at t = {t}")]
    SingularMetric { t: f64 },
    #[error("metric rate disagrees with the finite-difference derivative of the metric at t = {t} (deviation {deviation:e})")]
    InconsistentMetricRate { t: f64, deviation: f64 },
    #[error("adaptive quadrature did not converge (last change {change:e})")]
    QuadratureFailure { change: f64 },
    #[error("operator has negative eigenvalue {value:e}: positivity of the spatial operator is violated")]
    NegativeEigenvalue { value: f64 },
    #[error("operator has a zero mode (eigenvalue {value:e}); regularize with a small mass")]
    ZeroMode { value: f64 },
    #[error("degenerate eigenspace structure changed between t = {from} and t = {to}")]
    DegeneracyMismatch { from: f64, to: f64 },
    #[error("coupling matrices violate the Bogoliubov symmetries at t = {t}: residual {residual:e} > {tolerance:e}")]
    SymmetryViolation { t: f64, residual: f64, tolerance: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepFailure { t: f64, h: f64 },
    #[error("Bogoliubov identity residual {residual:e} exceeds {limit:e} at t = {t}")]
    IdentityDrift { t: f64, residual: f64, limit: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("perturbed mode data missing or inconsistent: {0}")]
    MissingPerturbedModes(String),
    #[error("time profile does not decay, so its Fourier transform is not a function")]
    NonDecayingProfile,
    #[error("time grid is not strictly increasing near index {index}")]
    NonMonotonicGrid { index: usize },
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal conditions attached to results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// The window length is outside `1 << omega_p * dt << 1 / epsilon`.
    WindowViolation { omega_dt: f64, epsilon: f64 },
    /// A curve was still changing at the end of the integration range.
    AsymptoteNotReached { mode: i64, relative_change: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::WindowViolation { omega_dt, epsilon } => write!(
                f,
                "window outside validity range: omega_p*dt = {omega_dt:e}, epsilon*omega_p*dt = {:e}",
                omega_dt * epsilon
            ),
            Warning::AsymptoteNotReached { mode, relative_change } => write!(
                f,
                "mode {mode} has not plateaued (relative change {relative_change:e} over the last tenth of the run)"
            ),
        }
    }
}
