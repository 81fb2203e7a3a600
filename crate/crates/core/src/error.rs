use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site count {sites} exceeds the supported limit of {limit}")]
    TooManySites { sites: usize, limit: usize },

    #[error("eigensolver did not converge (matrix digest {digest})")]
    EigenSolverFailed { digest: String },

    #[error("target energy {target} lies outside the open spectral interval ({min}, {max})")]
    EnergyOutOfRange { target: f64, min: f64, max: f64 },

    #[error("spectrum is degenerate: width {width} is below tolerance")]
    DegenerateSpectrum { width: f64 },

    #[error("state is not normalized: norm^2 = {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("subsystem mismatch: {0}")]
    SubsystemMismatch(String),

    #[error("matrix is not Hermitian: deviation {deviation}")]
    NotHermitian { deviation: f64 },

    #[error("trace distance {value} overshoots [0, 1] beyond tolerance")]
    TraceDistanceOvershoot { value: f64 },

    #[error("correlator denominator {value} is below floor {floor}")]
    UndefinedCorrelator { value: f64, floor: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the numerical pipeline, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenSolverFailed { .. }
                | Error::EnergyOutOfRange { .. }
                | Error::DegenerateSpectrum { .. }
                | Error::NotNormalized { .. }
                | Error::NotHermitian { .. }
                | Error::TraceDistanceOvershoot { .. }
                | Error::UndefinedCorrelator { .. }
        )
    }
}
