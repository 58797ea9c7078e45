//! Adam on binary cross-entropy, with per-epoch validation bookkeeping.

mod adam;
mod fit;
pub mod loss;
mod runlog;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::{evaluate_loss, fit, fraction_count, split_indices, FitError, SegmentationSet, TrainConfig};
pub use runlog::{EpochRecord, RunLog, RUNLOG_COLUMNS};
