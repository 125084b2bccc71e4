//! Tensor engine with analytic backward passes.
//!
//! Layers are free functions over [`Tensor`]s; each `*_backward` takes the
//! forward inputs and the output gradient and returns input/parameter
//! gradients. Everything is generic over [`Scalar`] so the same code runs in
//! `f32` for training and `f64` for gradient checks.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod loss;
pub mod pool;
pub mod scalar;
pub mod schedule;
pub mod tensor;
pub mod unet;

#[cfg(test)]
pub(crate) mod testutil;

pub use activation::{prelu, prelu_backward, sigmoid};
pub use adam::{adam_step, ModelState};
pub use conv::{conv2d, conv2d_backward, upconv2, upconv2_backward, LayerGrads};
pub use loss::{bce_loss, mae_loss, LossKind};
pub use pool::{maxpool2, maxpool2_backward};
pub use scalar::Scalar;
pub use schedule::{lr_at_epoch, TrainHyper};
pub use tensor::{concat_channels, split_channels, Tensor};
pub use unet::{crop, reflect_pad, uncrop, Padding, UNet, UNetConfig};
