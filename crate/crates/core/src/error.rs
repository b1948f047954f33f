use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("points coincide; direction undefined")]
    CoincidentPoints,
    #[error("cell ({0}, {1}) has an invalid or missing neighborhood")]
    InvalidNeighborhood(usize, usize),
    #[error("direction at or below the surface tangent plane")]
    BelowHorizon,
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("point lies behind the device")]
    BehindDevice,
    #[error("depth must be positive, got {0}")]
    NonpositiveDepth(f64),
    #[error("rays are parallel")]
    ParallelRays,
    #[error("need at least {needed} views, got {got}")]
    InsufficientViews { needed: usize, got: usize },
    #[error("degenerate views: {0}")]
    DegenerateViews(&'static str),
    #[error("device centers coincide")]
    ZeroBaseline,
    #[error("rig is not in canonical rectified form: {0}")]
    NotRectified(&'static str),
    #[error("no transport correspondence above threshold")]
    NoCorrespondence,
    #[error("camera ray nearly perpendicular to the epipolar axis (|omega_x| = {0:e})")]
    SingularRay(f64),
    #[error("point transport {0:e} below threshold")]
    VanishingTransport(f64),
    #[error("integration seed {0} is masked")]
    InvalidSeed(usize),
    #[error("row {0} has no usable correspondence")]
    EmptyRow(usize),
    #[error("no jointly valid cells")]
    NoOverlap,
    #[error("all output cells are invalid")]
    AllInvalid,
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("malformed {format} data: {message}")]
    Format {
        format: &'static str,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable, machine-readable name of the error class.
    pub fn class(&self) -> &'static str {
        match self {
            Error::CoincidentPoints => "CoincidentPoints",
            Error::InvalidNeighborhood(..) => "InvalidNeighborhood",
            Error::BelowHorizon => "BelowHorizon",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::BehindDevice => "BehindDevice",
            Error::NonpositiveDepth(_) => "NonpositiveDepth",
            Error::ParallelRays => "ParallelRays",
            Error::InsufficientViews { .. } => "InsufficientViews",
            Error::DegenerateViews(_) => "DegenerateViews",
            Error::ZeroBaseline => "ZeroBaseline",
            Error::NotRectified(_) => "NotRectified",
            Error::NoCorrespondence => "NoCorrespondence",
            Error::SingularRay(_) => "SingularRay",
            Error::VanishingTransport(_) => "VanishingTransport",
            Error::InvalidSeed(_) => "InvalidSeed",
            Error::EmptyRow(_) => "EmptyRow",
            Error::NoOverlap => "NoOverlap",
            Error::AllInvalid => "AllInvalid",
            Error::Parse { .. } => "ParseError",
            Error::Validation { .. } => "ValidationError",
            Error::Format { .. } => "FormatError",
            Error::Io(_) => "IoError",
        }
    }

    pub(crate) fn dims(what: &'static str, expected: usize, got: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            got,
        }
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}
