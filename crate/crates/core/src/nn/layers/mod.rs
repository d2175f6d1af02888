mod batchnorm;
mod conv;
mod dense;
mod lstm;
mod pool;
mod simple;

pub use batchnorm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use conv::{col2im, im2col, Conv2d};
pub use dense::Dense;
pub use lstm::Lstm;
pub use pool::MaxPool2;
pub use simple::{Flatten, Relu};

use super::{LayerSpec, NnError, Scalar, Tensor};

/// One differentiable stage of a network.
///
/// `forward` runs in training mode and caches what `backward` needs. `infer` is
/// the read-only evaluation path (batchnorm uses running statistics there).
/// Gradients accumulate across `backward` calls until `zero_grad`.
pub trait Layer<S: Scalar>: Send + Sync {
    fn spec(&self) -> LayerSpec;

    fn infer(&self, x: &Tensor<S>) -> Result<Tensor<S>, NnError>;

    fn forward(&mut self, x: &Tensor<S>) -> Result<Tensor<S>, NnError>;

    fn backward(&mut self, dy: &Tensor<S>) -> Result<Tensor<S>, NnError>;

    /// Trainable parameters paired with their gradient accumulators.
    fn param_grads(&mut self) -> Vec<(&mut Tensor<S>, &mut Tensor<S>)> {
        Vec::new()
    }

    /// Every persisted tensor, parameters first, then buffers.
    fn tensors(&self) -> Vec<(&'static str, &Tensor<S>)> {
        Vec::new()
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<S>)> {
        Vec::new()
    }

    fn zero_grad(&mut self) {
        for (_, g) in self.param_grads() {
            g.fill(S::zero());
        }
    }
}

pub(crate) fn no_cache(layer: &str) -> NnError {
    NnError::ShapeMismatch(format!("{layer}: backward called without a training forward pass"))
}

pub(crate) fn check_same_shape<S: Scalar>(dy: &Tensor<S>, want: &[usize], layer: &str) -> Result<(), NnError> {
    if dy.shape() != want {
        return Err(NnError::ShapeMismatch(format!("{layer}: gradient shape {:?}, expected {want:?}", dy.shape())));
    }
    Ok(())
}
