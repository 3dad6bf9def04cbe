//! Document/property reading at desk scale: a data pipeline over
//! (document, property, answer-set) instances, ten model architectures from
//! classification to character-level sequence decoding, a deterministic
//! training loop with random hyperparameter search, and the Mean F1
//! evaluation protocol with method-class bounds.
//!
//! With the default `parallel` feature, instance-level work (scoring,
//! statistics, synthesis, search trials) fans out over rayon with
//! order-preserving collection, so results are bit-identical to the
//! sequential fallback (`--no-default-features`).

pub mod data;
pub mod eval;
pub mod models;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("data: {0}")]
    Data(String),
    #[error("model: {0}")]
    Model(String),
    #[error("eval: {0}")]
    Eval(String),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error(transparent)]
    Tape(#[from] tapegrad::TapeError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
