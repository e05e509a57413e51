//! A deliberately small neural-network engine.
//!
//! It supports exactly what two compact CNNs need: 3x3 same-padding
//! convolutions, batch normalization, ReLU, adaptive average pooling,
//! flattening and dense layers, with hand-written backward passes over a
//! fixed layer stack, softmax cross-entropy and MSE losses, Adam, and a
//! binary checkpoint format.
//!
//! Everything is generic over [`Real`] so that gradients computed in `f32`
//! can be replayed in `f64` against finite differences.

pub mod checkpoint;
pub mod gradcheck;
mod error;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
mod real;
mod tensor;

pub use error::{NnError, Result};
pub use layers::Mode;
pub use network::Sequential;
pub use optim::AdamState;
pub use real::Real;
pub use tensor::Tensor;
