use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("pixel {pixel} probabilities sum to {sum}, expected 1")]
    NotNormalized { pixel: usize, sum: f64 },
    #[error("pixel {pixel} class {class} has probability {value} outside [0, 1]")]
    OutOfRange { pixel: usize, class: usize, value: f64 },
    #[error("no input maps")]
    EmptyInput,
    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("requested {requested} segments for an image of {pixels} pixels")]
    TooManySegments { requested: usize, pixels: usize },
    #[error("prediction mask contains IGNORE pixels")]
    PredHasIgnore,
    #[error("binary metrics requested for {0} classes")]
    NotBinary(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

impl Error {
    pub(crate) fn dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Self {
        Error::DimensionMismatch(alloc::format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
