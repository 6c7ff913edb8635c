//! Minimal differentiable-computation core for small convolutional policies.
//!
//! Dense `f64` tensors, a recorded forward tape with reverse-mode gradients,
//! 2D convolution and linear layers, the masked bounded softmax used by
//! stochastic policies, Adam, and a versioned binary checkpoint format.

pub mod checkpoint;
pub mod error;
mod gemm;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod softmax;
pub mod tensor;

pub use error::{Result, TensorError};
pub use graph::{Graph, NodeGrads, Var};
pub use layers::{Conv2d, Linear};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use softmax::masked_bounded_softmax;
pub use tensor::Tensor;
