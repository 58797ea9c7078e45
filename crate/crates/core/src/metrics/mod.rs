//! Segmentation scores over binary masks and probability maps.

mod confusion;
mod evaluate;
mod roc;

pub use confusion::{
    binarize, confusion, dice, dice_counts, jaccard, jaccard_counts, scores, ConfusionCounts, Ratio, Scores,
};
pub use evaluate::{
    evaluate, evaluate_predictions, predict_image, Averaging, EvalOptions, Inference, MetricsReport, SampleMetrics,
    METRICS_COLUMNS,
};
pub use roc::{roc_auc, Roc, RocPoint};
