//! Minimal tape-based reverse-mode autodiff engine.
//!
//! A forward pass records every primitive application on a [`Tape`]; the tape
//! is replayed in reverse to accumulate gradients for every bound
//! [`Parameter`]. Values are dense row-major `f64` tensors. The engine is
//! deliberately small: just the primitives the recurrent readers and
//! sequence decoders need, plus fused loss ops that stay numerically stable.
//!
//! A tape is single-threaded by contract. Independent tapes over independent
//! parameter sets may run on separate threads.

pub mod checkpoint;
pub mod gradcheck;
pub mod init;
pub mod params;
pub mod rnn;
pub mod tape;
pub mod tensor;

pub use gradcheck::{compare_gradients, finite_difference, GradCheckConfig};
pub use params::{ParamId, ParamSet, Parameter};
pub use rnn::{GruCell, LstmCell};
pub use tape::{Gradients, NodeId, PrimitiveKind, Tape};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("{op}: shape mismatch: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: expected {expected}, got shape {got:?}")]
    BadShape {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("{op}: expects {expected} inputs, got {got}")]
    Arity {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("embed: token id {id} out of range for table with {rows} rows")]
    IdOutOfRange { id: usize, rows: usize },
    #[error("row: index {index} out of range for matrix with {rows} rows")]
    RowOutOfRange { index: usize, rows: usize },
    #[error("backward: loss must be a scalar, got shape {got:?}")]
    NonScalarLoss { got: Vec<usize> },
    #[error("tensor: shape {shape:?} does not match {len} values")]
    ShapeDataMismatch { shape: Vec<usize>, len: usize },
    #[error("parameter name already in use: {0}")]
    DuplicateParam(String),
    #[error("cross_entropy: target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TapeError>;
