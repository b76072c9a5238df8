//! Minimal reverse-mode neural kernel: 4-D tensors, 2-D convolution with
//! replicate padding, ReLU, sigmoid, a fully-connected layer, the GAN
//! binary-cross-entropy losses, Adam, and finite-difference gradient checks.
//!
//! All math runs in double precision; forward passes are deterministic.

mod adam;
mod conv;
mod gradcheck;
mod loss;
mod ops;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use conv::{Conv2dLayer, ConvGrads, Padding};
pub use gradcheck::{central_difference, max_rel_error, run_gradient_suite, GradCheckReport};
pub use loss::{
    bce_losses, discriminator_loss_grads, generator_loss, generator_loss_grad, GeneratorLossKind,
    PROB_CLAMP,
};
pub use ops::{
    fc_backward, fc_forward, relu_backward, relu_forward, sigmoid_backward, sigmoid_forward,
    sigmoid_scalar, FcGrads, FcLayer,
};
pub use tensor::Tensor4;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{context}: expected shape {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("channel mismatch: input has {input} channels, layer expects {layer}")]
    ChannelMismatch { input: usize, layer: usize },
    #[error("input {input:?} smaller than kernel {kernel:?} after padding")]
    UndersizedInput {
        input: (usize, usize),
        kernel: (usize, usize),
    },
    #[error("invalid layer config: {0}")]
    BadLayerConfig(String),
    #[error("data length {got} does not match shape volume {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite gradient for parameter {param}")]
    NonFiniteGradient { param: String },
    #[error("empty batch in {0}")]
    EmptyBatch(&'static str),
}
