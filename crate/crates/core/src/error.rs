use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: String, index: usize },

    #[error("symbol of operator `{op}` is undefined at lattice index {index}")]
    SymbolUndefined { op: String, index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ellipticity violated at step {step} (t = {time}): coefficient {value} outside [{lower}, {upper}]")]
    Ellipticity {
        step: usize,
        time: f64,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("state became non-finite at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },

    #[error("hypothesis violated at Picard iteration {iteration}: {detail}")]
    Hypothesis { iteration: usize, detail: String },

    #[error("Picard iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The innermost error, looking through [`Error::Iteration`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Iteration { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn in_iteration(self, iteration: usize) -> Self {
        match self {
            e @ (Error::Iteration { .. } | Error::Hypothesis { .. }) => e,
            e => Error::Iteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
