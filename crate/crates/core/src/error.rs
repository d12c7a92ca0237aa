use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: no edges")]
    EmptyGraph(PathBuf),

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("root node {node} of cascade {cascade} is not in the graph")]
    RootNotInGraph { cascade: String, node: String },

    #[error("cascade {cascade} has {size} adoptions, fewer than the {needed} required")]
    CascadeTooShort {
        cascade: String,
        size: usize,
        needed: usize,
    },

    #[error("untrackable cascade {0}: every observed event has zero followers")]
    Untrackable(String),

    #[error("need at least {needed} samples above the cutoff, found {found}")]
    TooFewTailSamples { needed: usize, found: usize },

    #[error("supercritical sample: simulation hit the cap of {0} events")]
    Supercritical(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected} columns, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training data contains a single class ({0})")]
    SingleClass(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
