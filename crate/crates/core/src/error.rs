use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("column {0} has zero variance and cannot be standardized")]
    ConstantColumn(usize),

    #[error("covariance matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("design has n = {n} rows and p = {p} columns; this procedure requires n <= p")]
    DimensionError { n: usize, p: usize },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("sample split would leave an empty part ({first} / {second} rows)")]
    EmptySplit { first: usize, second: usize },

    #[error("2x2 moment system is singular: free eigenvalues are effectively constant")]
    SingularSystem,

    #[error("every dual weight yields a singular inner problem")]
    DegenerateDual,

    #[error("invalid constraint set: {0}")]
    InvalidConstraints(String),

    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("all bootstrap replicates are identical")]
    DegenerateBootstrap,

    #[error("response vector is identically zero")]
    ZeroResponse,

    #[error("Marchenko-Pastur parameter must lie in (0, 1), got {0}")]
    InvalidGamma(f64),

    #[error("eigenvalues sum to {sum}, expected n = {n}")]
    NormalizationError { sum: f64, n: usize },

    #[error("invalid correlation structure: {0}")]
    InvalidCorrelation(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("numerical routine failed: {0}")]
    Numerical(String),

    #[error("{count} trial(s) failed; first failure: {first}")]
    TrialFailures { count: usize, first: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable category, used by the CLI and the C API.
    pub fn category(&self) -> &'static str {
        match self {
            Error::ConstantColumn(_) => "ConstantColumn",
            Error::NotPositiveDefinite(_) => "NotPositiveDefinite",
            Error::DimensionError { .. } => "DimensionError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptySplit { .. } => "EmptySplit",
            Error::SingularSystem => "SingularSystem",
            Error::DegenerateDual => "DegenerateDual",
            Error::InvalidConstraints(_) => "InvalidConstraints",
            Error::InvalidAlpha(_) => "InvalidAlpha",
            Error::DegenerateBootstrap => "DegenerateBootstrap",
            Error::ZeroResponse => "ZeroResponse",
            Error::InvalidGamma(_) => "InvalidGamma",
            Error::NormalizationError { .. } => "NormalizationError",
            Error::InvalidCorrelation(_) => "InvalidCorrelation",
            Error::NonFinite(_) => "NonFinite",
            Error::Numerical(_) => "Numerical",
            Error::TrialFailures { .. } => "TrialFailures",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
