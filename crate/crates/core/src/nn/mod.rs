//! Differentiable-computation substrate: dense tensors with reverse-mode
//! gradients, transformer building blocks, Adam, and finite-difference
//! gradient verification.

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;

pub use adam::{AdamConfig, Param, ParameterStore};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointError};
pub use gradcheck::{grad_check, gradients, Binder, GradCheckReport, LossFn};
pub use graph::{Graph, NnError, TensorId};
