use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("group action is not external: {0}")]
    NotExternal(String),

    #[error("complex is not a tree: {0}")]
    NotTree(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("construction failed: {message} (max deviation {deviation:.3e})")]
    Construction { message: String, deviation: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn construction(msg: impl Into<String>, deviation: f64) -> Self {
        Error::Construction { message: msg.into(), deviation }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Resource(_) => "resource",
            Error::NotExternal(_) => "not_external",
            Error::NotTree(_) => "not_tree",
            Error::Numerical(_) => "numerical",
            Error::Construction { .. } => "construction",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
