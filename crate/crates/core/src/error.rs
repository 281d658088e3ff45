use thiserror::Error;

/// Errors raised by the simulator library.
///
/// Every variant carries a stable machine-readable code through [`Error::code`],
/// which the command-line front end prints verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate normalization: N_arb = {value:e} is not positive")]
    DegenerateNormalization { value: f64 },

    #[error("state has no terms or zero norm")]
    EmptyState,

    #[error("mode frames differ between operands")]
    FrameMismatch,

    #[error("bloch vector outside the admissible region: 1 - x_q cos(theta_d) = {denominator:e}")]
    InvalidBloch { denominator: f64 },

    #[error("quadrature did not converge at {location}: last estimate change {delta:e} after {levels} refinements")]
    QuadratureNonConvergence {
        location: String,
        delta: f64,
        levels: usize,
    },

    #[error("sampling window too small: {lost:e} of the power fell outside")]
    WindowUndersampled { lost: f64 },

    #[error("ccd image fully saturated; reduce exposure")]
    Saturated,

    #[error("profile is empty after background removal")]
    EmptyProfile,

    #[error("fit did not converge after {iterations} iterations (last params {params:?}, rss {rss:e})")]
    FitNonConvergence {
        iterations: usize,
        params: Vec<f64>,
        rss: f64,
    },

    #[error("phase unidentifiable: fringe amplitude {fringe:e} below 3x noise floor {noise:e}")]
    PhaseUnidentifiable { fringe: f64, noise: f64 },

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "E_PARAM",
            Error::DegenerateNormalization { .. } => "E_NORM",
            Error::EmptyState => "E_EMPTY_STATE",
            Error::FrameMismatch => "E_FRAME",
            Error::InvalidBloch { .. } => "E_BLOCH",
            Error::QuadratureNonConvergence { .. } => "E_QUADRATURE",
            Error::WindowUndersampled { .. } => "E_WINDOW",
            Error::Saturated => "E_SATURATED",
            Error::EmptyProfile => "E_EMPTY_PROFILE",
            Error::FitNonConvergence { .. } => "E_FIT",
            Error::PhaseUnidentifiable { .. } => "E_PHASE",
            Error::Format(_) => "E_FORMAT",
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
