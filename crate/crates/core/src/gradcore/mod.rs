//! Dense-matrix reverse-mode automatic differentiation and the Adam optimizer.
//!
//! Every trainable computation in the crate records its forward pass on a
//! [`Tape`], which is then replayed backwards to accumulate gradients into
//! parameters held by a [`ParamStore`]. There is no broadcasting beyond
//! scalar × tensor; callers align shapes explicitly.

mod adam;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use params::{GroupId, Param, ParamId, ParamStore};
pub use tape::{log_sum_exp, sigmoid, Gradients, NodeId, Tape};
pub use tensor::Tensor;
