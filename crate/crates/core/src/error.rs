use thiserror::Error;

/// Errors raised by simulation, data preparation, training and metric code.
#[derive(Error, Debug)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("population rate runaway at t = {window_start_ms} ms: {count} spikes in a {window_ms} ms window (limit {limit})")]
    Runaway {
        window_start_ms: f64,
        window_ms: f64,
        count: u64,
        limit: u64,
    },
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("neuron id {id} out of vocabulary (vocab = {vocab})")]
    OutOfVocab { id: usize, vocab: usize },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, CoreError>;
