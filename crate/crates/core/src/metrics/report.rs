use serde::{Deserialize, Serialize};

use super::distance::boundary_distances;
use super::mask::BinaryMask;
use super::object::{object_dice, object_hausdorff, object_match};
use super::overlap::{dice, iou, precision_recall_f1};
use crate::decomposition::LabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub dice: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when either mask is empty.
    pub adb: Option<f64>,
    pub hausdorff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub f1: f64,
    pub object_dice: Option<f64>,
    pub object_hausdorff: Option<f64>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Means over classes (or samples), skipping absent values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub dice: f64,
    pub iou: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub adb: Option<f64>,
    pub hausdorff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub object: ObjectMetrics,
    pub mean: MeanMetrics,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn class_metrics(gt: &LabelMap, pred: &LabelMap, class: u8) -> Result<ClassMetrics> {
    let a = BinaryMask::from_class(gt, class);
    let b = BinaryMask::from_class(pred, class);
    let pr = precision_recall_f1(&a, &b)?;
    let (adb, hausdorff) = match boundary_distances(&a, &b) {
        Ok((ab, ba)) => (Some((ab.mean + ba.mean) / 2.0), Some(ab.max.max(ba.max))),
        Err(Error::Undefined(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ClassMetrics {
        class,
        dice: dice(&a, &b)?,
        iou: iou(&a, &b)?,
        precision: pr.precision,
        recall: pr.recall,
        f1: pr.f1,
        adb,
        hausdorff,
    })
}

fn undefined_as_none(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn mean_of(per_class: &[ClassMetrics]) -> MeanMetrics {
    MeanMetrics {
        dice: mean(per_class.iter().map(|c| c.dice)).unwrap_or(1.0),
        iou: mean(per_class.iter().map(|c| c.iou)).unwrap_or(1.0),
        precision: mean(per_class.iter().map(|c| c.precision)).unwrap_or(1.0),
        recall: mean(per_class.iter().map(|c| c.recall)).unwrap_or(1.0),
        f1: mean(per_class.iter().map(|c| c.f1)).unwrap_or(1.0),
        adb: mean(per_class.iter().filter_map(|c| c.adb)),
        hausdorff: mean(per_class.iter().filter_map(|c| c.hausdorff)),
    }
}

/// Per-class pixel and boundary metrics for classes `1..=num_classes`, plus
/// object-level metrics on foreground-union instances.
pub fn evaluate(gt: &LabelMap, pred: &LabelMap, num_classes: u8) -> Result<MetricsReport> {
    if gt.dims() != pred.dims() {
        return Err(Error::Shape(format!(
            "ground truth dims {:?} vs prediction dims {:?}",
            gt.dims(),
            pred.dims()
        )));
    }
    let per_class = (1..=num_classes)
        .map(|k| class_metrics(gt, pred, k))
        .collect::<Result<Vec<_>>>()?;
    let matching = object_match(gt, pred)?;
    let object = ObjectMetrics {
        f1: matching.f1(),
        object_dice: undefined_as_none(object_dice(&matching))?,
        object_hausdorff: undefined_as_none(object_hausdorff(&matching))?,
        true_positives: matching.true_positives(),
        false_positives: matching.unmatched_pred.len(),
        false_negatives: matching.unmatched_gt.len(),
    };
    let mean = mean_of(&per_class);
    Ok(MetricsReport {
        per_class,
        object,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: String,
    #[serde(flatten)]
    pub report: MetricsReport,
}

/// Dataset-level means: per class over samples, and object metrics over
/// samples, skipping absent values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub samples: usize,
    pub per_class: Vec<ClassMetrics>,
    pub object_f1: f64,
    pub object_dice: Option<f64>,
    pub object_hausdorff: Option<f64>,
    pub mean: MeanMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub samples: Vec<SampleReport>,
    pub summary: SummaryRow,
}

pub fn summarize(samples: Vec<SampleReport>) -> Result<DatasetReport> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot summarize zero samples".into()))?;
    let classes: Vec<u8> = first.report.per_class.iter().map(|c| c.class).collect();
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(k, &class)| {
            let rows = || samples.iter().map(move |s| &s.report.per_class[k]);
            ClassMetrics {
                class,
                dice: mean(rows().map(|c| c.dice)).unwrap_or(1.0),
                iou: mean(rows().map(|c| c.iou)).unwrap_or(1.0),
                precision: mean(rows().map(|c| c.precision)).unwrap_or(1.0),
                recall: mean(rows().map(|c| c.recall)).unwrap_or(1.0),
                f1: mean(rows().map(|c| c.f1)).unwrap_or(1.0),
                adb: mean(rows().filter_map(|c| c.adb)),
                hausdorff: mean(rows().filter_map(|c| c.hausdorff)),
            }
        })
        .collect::<Vec<_>>();
    let summary = SummaryRow {
        samples: samples.len(),
        object_f1: mean(samples.iter().map(|s| s.report.object.f1)).unwrap_or(1.0),
        object_dice: mean(samples.iter().filter_map(|s| s.report.object.object_dice)),
        object_hausdorff: mean(samples.iter().filter_map(|s| s.report.object.object_hausdorff)),
        mean: mean_of(&per_class),
        per_class,
    };
    Ok(DatasetReport { samples, summary })
}
