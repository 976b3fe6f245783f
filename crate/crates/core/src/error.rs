use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Protocol,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("row alignment: {0}")]
    Alignment(String),

    #[error("ingestion failed at line {line}: {message}")]
    Ingestion { line: usize, message: String },

    #[error("empty embedding: {0}")]
    EmptyEmbedding(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error("balancing: {message} (fake={fake}, real={real})")]
    Balancing {
        message: String,
        fake: usize,
        real: usize,
    },

    #[error("aspect {aspect}: {source}")]
    Aspect {
        aspect: String,
        #[source]
        source: Box<Error>,
    },

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub fn in_aspect(self, aspect: impl Into<String>) -> Self {
        Error::Aspect {
            aspect: aspect.into(),
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Degenerate(_) | Error::EmptyEmbedding(_) => ErrorClass::Numerical,
            Error::Protocol(_) | Error::Balancing { .. } => ErrorClass::Protocol,
            Error::Aspect { source, .. } | Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Input,
        }
    }
}
