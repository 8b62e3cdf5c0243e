use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("SNR {0} dB is outside the configured bands")]
    SnrOutOfRange(f64),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("single-class data: {0}")]
    SingleClass(String),

    #[error("band {0} has no training rows")]
    EmptyBand(usize),

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("format version mismatch: file has version {found}, this build reads version {expected}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("label index {index} out of range for a table of {len} names")]
    LabelOutOfRange { index: usize, len: usize },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e) }
    }

    /// Innermost error, unwrapping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
