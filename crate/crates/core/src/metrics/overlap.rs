use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCounts {
    pub intersection: usize,
    pub a: usize,
    pub b: usize,
}

pub fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> Result<OverlapCounts> {
    a.check_same_dims(b)?;
    let mut c = OverlapCounts {
        intersection: 0,
        a: 0,
        b: 0,
    };
    for (&x, &y) in a.values().iter().zip(b.values()) {
        c.a += usize::from(x);
        c.b += usize::from(y);
        c.intersection += usize::from(x && y);
    }
    Ok(c)
}

/// 2|A∩B| / (|A|+|B|); two empty masks score 1.
pub fn dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = overlap_counts(a, b)?;
    Ok(dice_from_counts(c.intersection, c.a, c.b))
}

pub(crate) fn dice_from_counts(intersection: usize, a: usize, b: usize) -> f64 {
    if a + b == 0 {
        1.0
    } else {
        2.0 * intersection as f64 / (a + b) as f64
    }
}

/// |A∩B| / |A∪B|; two empty masks score 1.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = overlap_counts(a, b)?;
    let union = c.a + c.b - c.intersection;
    Ok(if union == 0 {
        1.0
    } else {
        c.intersection as f64 / union as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Pixel precision/recall/F1 of `pred` against `gt`. Both empty scores 1
/// everywhere; an empty side with a non-empty counterpart scores 0.
pub fn precision_recall_f1(gt: &BinaryMask, pred: &BinaryMask) -> Result<PrecisionRecall> {
    let c = overlap_counts(gt, pred)?;
    if c.a == 0 && c.b == 0 {
        return Ok(PrecisionRecall {
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
        });
    }
    let precision = if c.b == 0 { 0.0 } else { c.intersection as f64 / c.b as f64 };
    let recall = if c.a == 0 { 0.0 } else { c.intersection as f64 / c.a as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(PrecisionRecall {
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(idx: &[usize]) -> BinaryMask {
        BinaryMask::from_indices(vec![2, 2], idx)
    }

    #[test]
    fn identical_masks() {
        let a = mask(&[0, 3]);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_masks() {
        let (a, b) = (mask(&[0]), mask(&[3]));
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        let pr = precision_recall_f1(&a, &b).unwrap();
        assert_eq!((pr.precision, pr.recall, pr.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_enumerated_pair() {
        // A = {(0,0),(0,1)}, B = {(0,1),(1,1)}
        let (a, b) = (mask(&[0, 1]), mask(&[1, 3]));
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert!((iou(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let pr = precision_recall_f1(&a, &b).unwrap();
        assert_eq!((pr.precision, pr.recall, pr.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn empty_conventions() {
        let e = mask(&[]);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert_eq!(iou(&e, &e).unwrap(), 1.0);
        let pr = precision_recall_f1(&e, &e).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
        let pr = precision_recall_f1(&mask(&[1]), &e).unwrap();
        assert_eq!((pr.precision, pr.recall, pr.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch() {
        let a = BinaryMask::empty(vec![2, 2]);
        let b = BinaryMask::empty(vec![4]);
        assert!(dice(&a, &b).is_err());
    }
}
