//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its nodes during the
//! forward pass. [`Graph::backward`] then replays the tape in reverse and
//! produces gradients for every leaf created with `requires_grad`.
//!
//! The primitive set is deliberately closed: it covers exactly what a small
//! encoder-decoder transformer, its prompt encoders and the modality encoders
//! need, and nothing relies on implicit broadcasting. Every primitive is
//! checked against [`finite_difference_gradient`] in the test suite.
//!
//! Graphs are generic over the element type. `f32` is the standard training
//! precision, `f64` the verification precision used by gradient checks.

mod check;
mod error;
mod float;
mod graph;
mod kernels;
mod tensor;

pub use check::{
    finite_difference_gradient, max_relative_error, relative_error, vector_relative_error,
};
pub use error::{AutodiffError, Result};
pub use float::{Float, PrecisionMode};
pub use graph::{Activation, Gradients, Graph, NodeId};
pub use tensor::Tensor;
