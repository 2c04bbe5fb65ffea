use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: {message}")]
    Domain { line: u64, message: String },

    #[error("line {line}: duplicate rating for user {user_id}, item {item_id}")]
    DuplicateEntry { line: u64, user_id: u64, item_id: u64 },

    #[error("unknown user id {0}")]
    UnknownUser(u64),

    #[error("unknown item id {0}")]
    UnknownItem(u64),

    #[error("item {0} has no feature row")]
    MissingFeatures(u64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Training { epoch: usize, message: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed model file: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps the error with a short description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
