use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid probability: {0}")]
    InvalidProbability(String),

    #[error("reducible matrix")]
    Reducible,

    #[error("periodic matrix (period {0}); aperiodicity check fails")]
    Periodic(usize),

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("tau = {0} <= 1: supercritical regime required")]
    NotSupercritical(f64),

    #[error("invalid vertex id {0}")]
    InvalidVertex(usize),

    #[error("insufficient vertices of requested type {0}")]
    InsufficientVertices(usize),

    #[error("population cap {cap} exceeded at generation {generation} ({size} individuals)")]
    PopulationCap {
        generation: usize,
        size: u64,
        cap: u64,
    },

    #[error("survival too rare: acceptance rate {rate:.3e} after {attempts} attempts")]
    SurvivalTooRare { rate: f64, attempts: u64 },

    #[error("instance too large for exact oracle ({0} configurations)")]
    InstanceTooLarge(u128),

    #[error("empty pool")]
    EmptyPool,

    #[error("mismatched i0: approximation built for i0 = {law}, model has i0 = {model}")]
    MismatchedI0 { law: i64, model: i64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors caused by the user's input rather than by the run itself.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParams(_) | Error::InvalidProbability(_) | Error::InsufficientVertices(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
