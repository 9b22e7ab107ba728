//! Compact UNet: depthwise-separable encoder with a freeze switch, bilinear
//! upsample + concat decoder, 1×1 sigmoid head, receptive-field bound and the
//! checkpoint container.

mod checkpoint;
mod layers;
mod rf;
mod spec;
mod unet;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NormStats, FORMAT_VERSION};
pub use layers::{BatchNorm, ConvBnAct, DecoderBlock, DsBlock};
pub use rf::receptive_field_radius;
pub use spec::{EncoderStage, ModelSpec};
pub use unet::{Model, Tape};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error("checkpoint i/o error")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
