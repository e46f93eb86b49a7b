use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A metric failed the eigenvalue floor at construction or evaluation time.
    #[error("metric is not positive definite at grid index {index} (eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { index: usize, eigenvalue: f64 },

    /// The SPD guard tripped during time stepping.
    #[error("SPD guard violated at t = {t}, grid index {index} (relative eigenvalue {eigenvalue:e})")]
    SpdViolation { t: f64, index: usize, eigenvalue: f64 },

    #[error("non-finite value at t = {t}, grid index {index}")]
    NonFinite { t: f64, index: usize },

    #[error("exhaustion member {k} failed: {source}")]
    Member {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown geometry `{name}`; valid names: {valid}")]
    UnknownGeometry { name: String, valid: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable machine-readable tag used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::SpdViolation { .. } => "spd_violation",
            Error::NonFinite { .. } => "non_finite",
            Error::Member { .. } => "exhaustion_member",
            Error::Grid(_) => "grid",
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NotApplicable(_) => "not_applicable",
            Error::Config { .. } => "config",
            Error::UnknownGeometry { .. } => "unknown_geometry",
            Error::Io(_) => "io",
        }
    }
}
