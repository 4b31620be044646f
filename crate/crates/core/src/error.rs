use thiserror::Error;

/// Every failure the lab can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("eigenvalue {value} at position {index} is not strictly positive (the covariance must have trivial kernel)")]
    NonPositiveEigenvalue { index: usize, value: f64 },

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("projection did not converge after {iterations} iterations")]
    ProjectionDidNotConverge { iterations: usize },

    #[error("proximal solve did not converge (residual {residual:e} after {iterations} iterations)")]
    ProxDidNotConverge { residual: f64, iterations: usize },

    #[error("quadrature order {order} is too low (need at least 2)")]
    QuadratureOrderTooLow { order: usize },

    #[error("quadrature budget exceeded: {0}")]
    QuadratureBudgetExceeded(String),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("no admissible mollification width for n = {n} (best error {best_error:e}, tolerance {tolerance:e})")]
    ScheduleInfeasible {
        n: usize,
        best_error: f64,
        tolerance: f64,
    },

    #[error("unstable time step: {0}")]
    UnstableStep(String),

    #[error("path blow-up at step {step} (|coordinate| > 1e6 or non-finite)")]
    PathBlowup { step: usize },

    #[error("effective sample size {ess:.1} is below the required {required:.1}")]
    EffectiveSampleSizeTooLow { ess: f64, required: f64 },

    #[error("rate fit has insufficient points: {0}")]
    FitInsufficientPoints(String),

    #[error("unknown closed form `{0}`")]
    UnknownForm(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl LabError {
    /// The variant name, used as a stable error code in messages.
    pub fn code(&self) -> &'static str {
        match self {
            LabError::NonPositiveEigenvalue { .. } => "NonPositiveEigenvalue",
            LabError::EmptySpectrum => "EmptySpectrum",
            LabError::DimensionMismatch { .. } => "DimensionMismatch",
            LabError::InvalidParameter { .. } => "InvalidParameter",
            LabError::ProjectionDidNotConverge { .. } => "ProjectionDidNotConverge",
            LabError::ProxDidNotConverge { .. } => "ProxDidNotConverge",
            LabError::QuadratureOrderTooLow { .. } => "QuadratureOrderTooLow",
            LabError::QuadratureBudgetExceeded(_) => "QuadratureBudgetExceeded",
            LabError::QuadratureFailure(_) => "QuadratureFailure",
            LabError::ScheduleInfeasible { .. } => "ScheduleInfeasible",
            LabError::UnstableStep(_) => "UnstableStep",
            LabError::PathBlowup { .. } => "PathBlowup",
            LabError::EffectiveSampleSizeTooLow { .. } => "EffectiveSampleSizeTooLow",
            LabError::FitInsufficientPoints(_) => "FitInsufficientPoints",
            LabError::UnknownForm(_) => "UnknownForm",
            LabError::ConfigInvalid(_) => "ConfigInvalid",
            LabError::Io(_) => "Io",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for LabError {
    fn from(err: std::io::Error) -> Self {
        LabError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(LabError::DimensionMismatch { expected, got })
    }
}
