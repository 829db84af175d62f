//! Reverse-mode automatic differentiation over small dense matrices.
//!
//! Built for training tiny MLPs where the loss depends on input gradients
//! of another network, so the backward pass itself can be recorded and
//! differentiated (double backprop). Values are `f64` throughout.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod layers;
pub mod tape;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{Checkpoint, Section};
pub use error::AdError;
pub use layers::{glorot_bound, Activation, BoundMlp, DenseLayer, LayerSpec, Mlp, MlpSpec, NumericalLimit};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
