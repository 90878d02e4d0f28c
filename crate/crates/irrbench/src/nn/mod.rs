//! Minimal reverse-mode autodiff over dense tensors, plus parameter storage,
//! SGD, and checkpointing. Everything computes in f64.

pub mod checkpoint;
pub mod store;
pub mod tape;
pub mod tensor;

pub use store::{Init, ParamStore};
pub use tape::{CfcStep, CfcWeights, LstmWeights, NodeId, Tape};
pub use tensor::Tensor;
