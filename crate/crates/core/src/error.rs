use thiserror::Error;

/// Errors raised by the simulator.
///
/// Variants fall into three families that the CLI maps to distinct exit
/// codes: configuration problems, physics-domain violations (a model is being
/// used outside its range of validity), and numerical solver failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{field}` out of domain: {reason}")]
    ParameterDomain { field: &'static str, reason: String },

    #[error("susceptibility too strong for the dilute-medium model (1 + Re chi = {value:.3e})")]
    ModelBreakdown { value: f64 },

    #[error("round-trip amplitude {amplitude:.6} >= 1: gain exceeds loss, passive-cavity model invalid")]
    AboveThreshold { amplitude: f64 },

    #[error("formula domain error: {0}")]
    FormulaDomain(String),

    #[error("sensitivity factor {factor:.3e} is zero: linear model diverges, use the self-consistent solver")]
    CadDivergence { factor: f64 },

    #[error("no root of the resonance condition within {limit:.6e} rad/s of the lock point")]
    SolverRange { limit: f64 },

    #[error("calibration failed: {reason} (best residual {best_residual:.3e})")]
    CalibrationFailed { reason: String, best_residual: f64 },

    #[error("window too narrow: {0}")]
    WindowTooNarrow(String),

    #[error("peak extraction failed on the {side} side: {reason}")]
    Extraction { side: &'static str, reason: String },

    #[error("invalid bracket [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        Error::ParameterDomain {
            field,
            reason: reason.into(),
        }
    }

    /// Process exit code for this error (0 is success).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io(_) => 2,
            Error::ParameterDomain { .. }
            | Error::ModelBreakdown { .. }
            | Error::AboveThreshold { .. }
            | Error::FormulaDomain(_)
            | Error::CadDivergence { .. } => 3,
            Error::SolverRange { .. }
            | Error::CalibrationFailed { .. }
            | Error::WindowTooNarrow(_)
            | Error::Extraction { .. }
            | Error::InvalidBracket { .. }
            | Error::DegenerateFit(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
