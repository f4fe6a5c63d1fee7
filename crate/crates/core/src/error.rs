use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("ragged trajectories: {0}")]
    Ragged(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("requested rank {requested} exceeds the numerical rank {available} of {what}")]
    RankExceeded {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("{what} is numerically rank deficient (rank {rank} < {expected})")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        expected: usize,
    },

    #[error("trajectory diverged at t = {t} (state norm {norm:e})")]
    Diverged { t: usize, norm: f64 },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("refusing to materialize a {n}x{n} operator (limit {limit})")]
    TooLarge { n: usize, limit: usize },
}

impl Error {
    /// True for failures caused by the numerics of the data (rank guards,
    /// divergence, solver breakdown) rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::RankExceeded { .. }
                | Error::RankDeficient { .. }
                | Error::Diverged { .. }
                | Error::NoConvergence(_)
        )
    }
}
