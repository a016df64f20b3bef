use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular local fit: {0}")]
    SingularFit(String),

    #[error("series too short: got {got} samples, need at least {required}")]
    SeriesTooShort { got: usize, required: usize },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("ill-conditioned design: {0}")]
    IllConditioned(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("angle {angle:.6} rad is not covered by the boundary estimate (gap {gap_start:.6}..{gap_end:.6} rad)")]
    Uncovered {
        angle: f64,
        gap_start: f64,
        gap_end: f64,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
