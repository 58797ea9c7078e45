//! Recurrent (RU-Net) and recurrent-residual (R2U-Net) U-Net segmentation
//! models built on a small, deterministic reverse-mode autodiff core.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense NCHW tensors and the raw convolution / pooling kernels.
//! - [`autodiff`]: the recording [`Tape`], the [`ParamStore`] and a
//!   finite-difference [`gradcheck`](autodiff::gradcheck).
//! - [`nn`]: recurrent convolutional layers and the four block variants.
//! - [`model`]: U-Net, ResU-Net, RU-Net and R2U-Net, parameter accounting,
//!   checkpoints.
//! - [`train`]: Adam, binary cross-entropy, the epoch loop.
//! - [`data`]: image ingestion, normalisation, patches, folds, FOV masks and
//!   synthetic datasets.
//! - [`metrics`]: confusion counts, Dice / Jaccard, ROC and AUC.
//!
//! All kernels are single-threaded with a fixed accumulation order, so two
//! runs with the same seed are bit-identical.

pub mod autodiff;
pub mod container;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod train;

pub use autodiff::{ParamStore, Tape, Var};
pub use error::{Error, FormatError, Result};
pub use model::{Architecture, Model, ModelSpec};
pub use tensor::{Scalar, Tensor};
