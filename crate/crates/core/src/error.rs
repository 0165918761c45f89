use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("passive step requires row-normalized operator (row {row} sums to {sum})")]
    NotRowNormalized { row: usize, sum: f64 },

    #[error("dense factorization unavailable for this bundle ({0}); use the Neumann path")]
    FactorizationUnavailable(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("minimizer requires identity-degree Laplacian")]
    WrongLaplacianMode,

    #[error("empty training mask")]
    EmptyTrainingMask,

    #[error("empty mask")]
    EmptyMask,

    #[error("stale forward cache: computed for parameter version {cached}, parameters are at version {current}")]
    StaleCache { cached: u64, current: u64 },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("homophily target {target} unreachable: best achieved {achieved} after {attempts} attempts")]
    HomophilyUnreachable {
        target: f64,
        achieved: f64,
        attempts: usize,
    },

    #[error("tensor {name}: {msg}")]
    Checkpoint { name: String, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn dims(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 1,
            Error::Divergence { .. }
            | Error::CheckFailed(_)
            | Error::NotPositiveDefinite { .. }
            | Error::HomophilyUnreachable { .. } => 3,
            _ => 2,
        }
    }
}
