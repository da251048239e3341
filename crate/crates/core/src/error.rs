use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid aperture geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    #[error("receive pattern has no nonzero amplitude")]
    ZeroReceivePattern,

    #[error("transmit power {power} is not reachable by {elements} elements with amplitudes in [0, 1]")]
    InfeasiblePower { power: f64, elements: usize },

    #[error("sample rate {sample_rate} Hz is below the sweep bandwidth {bandwidth} Hz")]
    BadSampling { sample_rate: f64, bandwidth: f64 },

    #[error("delay {delay:e} s lies outside the range profile")]
    OutOfRangeDelay { delay: f64 },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("innovation covariance is singular")]
    SingularInnovationCov,

    #[error("length mismatch: {estimates} estimates against {truth} reference values")]
    LengthMismatch { estimates: usize, truth: usize },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("pattern bank: {0}")]
    Bank(String),

    #[error("raw signal dump: {0}")]
    RawDump(String),

    #[error("malformed table: {0}")]
    Table(String),

    #[error("cycle {cycle}: {source}")]
    Cycle {
        cycle: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Stable machine-readable tag, used in the CLI's JSON error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid_geometry",
            Error::InvalidPattern(_) => "invalid_pattern",
            Error::ZeroReceivePattern => "zero_receive_pattern",
            Error::InfeasiblePower { .. } => "infeasible_power",
            Error::BadSampling { .. } => "bad_sampling",
            Error::OutOfRangeDelay { .. } => "out_of_range_delay",
            Error::EmptyCloud => "empty_cloud",
            Error::SingularInnovationCov => "singular_innovation_cov",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Parse(_) => "parse_error",
            Error::Validation { .. } => "validation_error",
            Error::Bank(_) => "pattern_bank",
            Error::RawDump(_) => "raw_dump",
            Error::Table(_) => "table",
            Error::Cycle { source, .. } => source.kind(),
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
