//! Layers with hand-written backward passes.
//!
//! Each layer caches what its backward pass needs during a forward call made
//! with `Mode::Train`, then consumes that cache in `backward`. Gradients
//! accumulate into [`Param::grad`] until [`zero_grad`] is called.

mod activation;
mod batchnorm;
mod conv;
mod linear;
mod optim;
mod param;
mod pool;

pub use activation::{PRelu, Relu};
pub use batchnorm::BatchNorm2d;
pub use conv::Conv2d;
pub use linear::Linear;
pub use optim::{Adam, AdamConfig, LrSchedule};
pub use param::{child_name, zero_grad, Module, Param};
pub use pool::MaxPool2;

/// Forward-pass mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, caches kept for backward.
    Train,
    /// Running statistics, nothing cached.
    Eval,
}

impl Mode {
    #[inline]
    pub fn is_train(self) -> bool {
        matches!(self, Mode::Train)
    }
}
