//! Convolutional building blocks: the recurrent convolutional layer, the
//! forward / recurrent / residual / recurrent-residual block variants and
//! the resampling layers between resolution levels.

mod block;
mod init;
mod rcl;
mod resample;

pub use block::{Block, BlockSpec, BlockVariant, Projection, Shortcut};
pub use init::Initializer;
pub use rcl::{RclUnit, WeightSharing};
pub use resample::{downsample, Upsample};
