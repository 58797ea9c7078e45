//! Loading, preparing and splitting segmentation data.

mod folds;
mod fov;
mod image_io;
mod ingest;
mod patches;
pub mod pnm;
mod sample;
mod synthetic;
mod transform;

pub use folds::{make_folds, Fold, SplitPlan};
pub use fov::{fov_mask, generate_fov, FovOptions};
pub use image_io::{decode_image, is_image_path, read_image, write_image, RawImage, IMAGE_EXTENSIONS};
pub use ingest::{ingest, to_grayscale, Crop, IngestOptions, MASK_THRESHOLD};
pub use patches::{plan_patches, sample_patches, PatchOrigin, PatchSet, DEFAULT_PATCH_SIZE, PATCH_MAGIC};
pub use sample::{Provenance, Sample};
pub use synthetic::{synthetic, SyntheticKind};
pub use transform::{
    image_stats, normalize, normalize_all, normalize_with, resize, resize_bilinear, resize_nearest, NormScope,
};
