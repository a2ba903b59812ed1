use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("numerical blowup at t = {time}: {detail}")]
    Blowup { time: f64, detail: String },

    #[error("degenerate equilibrium: {0}")]
    DegenerateEquilibrium(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("ensemble member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// True for blowup errors, including those wrapped by an ensemble member.
    pub fn is_blowup(&self) -> bool {
        match self {
            Error::Blowup { .. } => true,
            Error::Member { source, .. } => source.is_blowup(),
            _ => false,
        }
    }
}
