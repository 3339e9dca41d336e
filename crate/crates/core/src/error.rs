use thiserror::Error;

/// Errors surfaced by the simulator, the curve model and the trainers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid action: {0}")]
    Action(String),

    #[error("unreachable link: positive data size with zero uplink rate")]
    UnreachableLink,

    #[error("episode over: iteration {iteration} exceeds episode length {episode_len}")]
    EpisodeOver { iteration: u32, episode_len: u32 },

    #[error("resolution {p} ppi outside curve domain [{lo}, {hi}]")]
    OutOfDomain { p: f64, lo: f64, hi: f64 },

    #[error("curve fit needs at least {needed} distinct resolution values, got {got}")]
    FitUnderdetermined { needed: usize, got: usize },

    #[error("curve fit failed: {0}")]
    FitSingular(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite {quantity} during update {update}")]
    NonFiniteLoss { quantity: String, update: u64 },

    #[error("unknown scenario \"{0}\" (expected one of 33..37)")]
    UnknownScenario(String),

    #[error("unknown algorithm \"{0}\" (expected happo, haa2c, ippo or random)")]
    UnknownAlgorithm(String),

    #[error("malformed {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("no metrics rows found under {0}")]
    EmptyAggregation(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
