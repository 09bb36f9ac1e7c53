use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("degenerate graph: {0}")]
    Degenerate(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("fixed-point overflow: {0}")]
    Overflow(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("amplitude amplification failed: {0}")]
    Amplification(String),
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    /// True for failures caused by I/O or configuration rather than numerics.
    pub fn is_io_or_config(&self) -> bool {
        match self {
            Error::Io(_) | Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_io_or_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
