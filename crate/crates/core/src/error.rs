use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("topology: invalid degree s={s} for n={n}: {reason}")]
    InvalidDegree { n: usize, s: usize, reason: &'static str },

    #[error("topology: invalid node count n={n}: {reason}")]
    InvalidSize { n: usize, reason: &'static str },

    #[error("topology: node id {id} out of range for n={n}")]
    OutOfRange { id: usize, n: usize },

    #[error("topology: unknown topology kind `{0}`")]
    UnknownTopology(String),

    #[error("mixing: graph is disconnected (spectral gap 0)")]
    Disconnected,

    #[error("mixing: spectral gap needs an undirected graph")]
    DirectedGraph,

    #[error("mixing: input vectors have zero dispersion")]
    DegenerateInput,

    #[error("mixing: gradient noise sigma must be positive")]
    ZeroNoise,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("protocol: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("protocol: message from round {got} delivered in round {expected}")]
    RoundMismatch { expected: u64, got: u64 },

    #[error("protocol: non-finite model value")]
    NonFinite,

    #[error("simulator: non-finite model at round {round}")]
    Diverged { round: u64 },

    #[error("simulator: configs are not comparable: {0}")]
    MismatchedConfigs(String),

    #[error("problems: dataset: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam { name, reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
