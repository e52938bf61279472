use thiserror::Error;

/// Errors raised by solving, smoothing, estimation and testing.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time grid is not strictly increasing at index {index}")]
    Grid { index: usize },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("t = {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("bandwidth must be positive and finite, got {0}")]
    Bandwidth(f64),

    #[error("degenerate smoothing window at t = {t}: {distinct} distinct design points, need {needed}")]
    DegenerateWindow { t: f64, distinct: usize, needed: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite integrand at t = {t}")]
    Quadrature { t: f64 },

    #[error("variance matrix is singular (condition number {condition:e})")]
    SingularSigma { condition: f64 },

    #[error("zero denominator in standardized statistic")]
    ZeroDenominator,

    #[error("zero variance estimate")]
    ZeroVariance,

    #[error("optimizer failed on every start: {0}")]
    NoConvergence(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short stable tag used to bucket failures in Monte Carlo reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Grid { .. } => "grid",
            Error::NonFiniteState { .. } => "non_finite_state",
            Error::OutOfRange { .. } => "out_of_range",
            Error::Bandwidth(_) => "bandwidth",
            Error::DegenerateWindow { .. } => "degenerate_window",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Dimension(_) => "dimension",
            Error::Config(_) => "config",
            Error::Quadrature { .. } => "quadrature",
            Error::SingularSigma { .. } => "singular_sigma",
            Error::ZeroDenominator => "zero_denominator",
            Error::ZeroVariance => "zero_variance",
            Error::NoConvergence(_) => "no_convergence",
            Error::UnknownModel(_) => "unknown_model",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
