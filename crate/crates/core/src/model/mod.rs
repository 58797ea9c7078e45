//! U-Net, ResU-Net, RU-Net and R2U-Net builders, parameter accounting and
//! checkpoints.

mod checkpoint;
mod count;
mod network;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainMeta, CHECKPOINT_MAGIC};
pub use count::{audit, count_parameters, AuditRow, AuditTable, ParamBreakdown, REFERENCE_COUNTS_M};
pub use network::Model;
pub use spec::{Architecture, ModelSpec, SPEC_KEYS};
