//! Reverse-mode differentiation over dense `f64` vectors, with the
//! recurrent cells a Stack-LSTM parser needs.
//!
//! Parameters live in a [`ParamStore`]. A [`Tape`] borrows the store,
//! records operations on vectors, and [`Tape::backward`] adds parameter
//! gradients into a [`Gradients`] buffer. Several tapes can read one store
//! at once; their gradient buffers are summed before an optimizer step.

pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod tape;

pub use lstm::{Lstm, LstmState, StackLstm, StackLstmRun};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{CheckpointError, Gradients, Init, ParamId, ParamStore, Tensor};
pub use tape::{masked_log_softmax, AdError, Tape, Var};
