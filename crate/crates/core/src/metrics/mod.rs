//! Segmentation metrics: pixel overlap (Dice, IoU, precision, recall, F1),
//! boundary distances (ADB, Hausdorff), and object-level detection metrics.

mod distance;
mod mask;
mod object;
mod overlap;
mod report;

pub use distance::{adb, boundary_distances, boundary_extract, hausdorff, DirectedDistances};
pub use mask::BinaryMask;
pub use object::{instances, object_dice, object_hausdorff, object_match, MatchedPair, ObjectMatching};
pub use overlap::{dice, iou, overlap_counts, precision_recall_f1, OverlapCounts, PrecisionRecall};
pub use report::{
    evaluate, summarize, ClassMetrics, DatasetReport, MeanMetrics, MetricsReport, ObjectMetrics,
    SampleReport, SummaryRow,
};
