//! Object-level detection and overlap metrics in the style of the gland
//! segmentation challenge: instances are connected components of the
//! foreground union, matched one-to-one when a prediction covers at least
//! half of a ground-truth object.

use serde::{Deserialize, Serialize};

use super::distance::{boundary_extract, hausdorff, nearest_distances};
use super::mask::BinaryMask;
use super::overlap::dice_from_counts;
use crate::decomposition::{connected_components, Connectivity, LabelMap, ObjectComponent};
use crate::error::{Error, Result};

/// Connected components of all foreground pixels regardless of class.
pub fn instances(map: &LabelMap) -> Result<Vec<ObjectComponent>> {
    let binary = map.with_labels(map.labels().iter().map(|&v| u8::from(v != 0)).collect())?;
    connected_components(&binary, Connectivity::default_for(map.dims().len()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectMatching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
    #[serde(skip)]
    pub gt_objects: Vec<ObjectComponent>,
    #[serde(skip)]
    pub pred_objects: Vec<ObjectComponent>,
}

impl ObjectMatching {
    pub fn true_positives(&self) -> usize {
        self.pairs.len()
    }

    /// 2TP / (2TP + FP + FN); 1 when neither side has objects.
    pub fn f1(&self) -> f64 {
        let tp = self.pairs.len() as f64;
        let denom = 2.0 * tp + (self.unmatched_gt.len() + self.unmatched_pred.len()) as f64;
        if denom == 0.0 {
            1.0
        } else {
            2.0 * tp / denom
        }
    }

    fn pred_of_gt(&self, g: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.gt == g).map(|p| p.pred)
    }

    fn gt_of_pred(&self, s: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.pred == s).map(|p| p.gt)
    }
}

fn intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Greedy one-to-one matching by descending overlap. A pair qualifies when
/// the prediction covers at least 50% of the ground-truth object.
pub fn object_match(gt: &LabelMap, pred: &LabelMap) -> Result<ObjectMatching> {
    if gt.dims() != pred.dims() {
        return Err(Error::Shape(format!(
            "ground truth dims {:?} vs prediction dims {:?}",
            gt.dims(),
            pred.dims()
        )));
    }
    let gt_objects = instances(gt)?;
    let pred_objects = instances(pred)?;

    let mut owner = vec![usize::MAX; pred.len()];
    for s in &pred_objects {
        for &i in &s.indices {
            owner[i] = s.id;
        }
    }
    let mut candidates = Vec::new();
    for g in &gt_objects {
        let mut counts: Vec<(usize, usize)> = Vec::new();
        for &i in &g.indices {
            let s = owner[i];
            if s == usize::MAX {
                continue;
            }
            match counts.iter_mut().find(|(id, _)| *id == s) {
                Some((_, n)) => *n += 1,
                None => counts.push((s, 1)),
            }
        }
        for (s, n) in counts {
            if 2 * n >= g.len() {
                candidates.push(MatchedPair {
                    gt: g.id,
                    pred: s,
                    overlap: n,
                });
            }
        }
    }
    candidates.sort_by(|a, b| b.overlap.cmp(&a.overlap).then(a.gt.cmp(&b.gt)).then(a.pred.cmp(&b.pred)));

    let mut gt_used = vec![false; gt_objects.len()];
    let mut pred_used = vec![false; pred_objects.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if gt_used[c.gt] || pred_used[c.pred] {
            continue;
        }
        gt_used[c.gt] = true;
        pred_used[c.pred] = true;
        pairs.push(c);
    }
    pairs.sort_by_key(|p| p.gt);
    Ok(ObjectMatching {
        pairs,
        unmatched_gt: (0..gt_objects.len()).filter(|&g| !gt_used[g]).collect(),
        unmatched_pred: (0..pred_objects.len()).filter(|&s| !pred_used[s]).collect(),
        gt_objects,
        pred_objects,
    })
}

fn weights(objs: &[ObjectComponent]) -> Vec<f64> {
    let total: usize = objs.iter().map(|o| o.len()).sum();
    objs.iter().map(|o| o.len() as f64 / total as f64).collect()
}

/// Half the size-weighted dice over ground-truth objects plus half the
/// size-weighted dice over predicted objects, each against its matched
/// counterpart. Unmatched objects score 0.
pub fn object_dice(matching: &ObjectMatching) -> Result<f64> {
    let (gts, preds) = (&matching.gt_objects, &matching.pred_objects);
    if gts.is_empty() && preds.is_empty() {
        return Err(Error::Undefined("object dice with no objects on either side".into()));
    }
    let pair_dice = |g: &ObjectComponent, s: &ObjectComponent| {
        dice_from_counts(intersection(&g.indices, &s.indices), g.len(), s.len())
    };
    let mut gt_term = 0.0;
    if !gts.is_empty() {
        for (g, w) in gts.iter().zip(weights(gts)) {
            if let Some(s) = matching.pred_of_gt(g.id) {
                gt_term += w * pair_dice(g, &preds[s]);
            }
        }
    }
    let mut pred_term = 0.0;
    if !preds.is_empty() {
        for (s, w) in preds.iter().zip(weights(preds)) {
            if let Some(g) = matching.gt_of_pred(s.id) {
                pred_term += w * pair_dice(&gts[g], s);
            }
        }
    }
    Ok(0.5 * gt_term + 0.5 * pred_term)
}

fn mask_of(o: &ObjectComponent) -> BinaryMask {
    BinaryMask::from_indices(o.dims.clone(), &o.indices)
}

/// Object on the other side with the smallest boundary-to-boundary gap;
/// ties go to the lower id.
fn nearest_object(o: &ObjectComponent, others: &[ObjectComponent]) -> usize {
    let boundary = boundary_extract(&mask_of(o));
    let mut best = (f64::INFINITY, 0);
    for other in others {
        let d = nearest_distances(&o.dims, &boundary, &boundary_extract(&mask_of(other)))
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if d < best.0 {
            best = (d, other.id);
        }
    }
    best.1
}

/// Size-weighted Hausdorff distance, averaged over both sides like
/// [`object_dice`]. Unmatched objects are measured against the nearest
/// object on the other side.
pub fn object_hausdorff(matching: &ObjectMatching) -> Result<f64> {
    let (gts, preds) = (&matching.gt_objects, &matching.pred_objects);
    if gts.is_empty() || preds.is_empty() {
        return Err(Error::Undefined(
            "object Hausdorff needs objects on both sides".into(),
        ));
    }
    let mut gt_term = 0.0;
    for (g, w) in gts.iter().zip(weights(gts)) {
        let s = matching.pred_of_gt(g.id).unwrap_or_else(|| nearest_object(g, preds));
        gt_term += w * hausdorff(&mask_of(g), &mask_of(&preds[s]))?;
    }
    let mut pred_term = 0.0;
    for (s, w) in preds.iter().zip(weights(preds)) {
        let g = matching.gt_of_pred(s.id).unwrap_or_else(|| nearest_object(s, gts));
        pred_term += w * hausdorff(&mask_of(&gts[g]), &mask_of(s))?;
    }
    Ok(0.5 * gt_term + 0.5 * pred_term)
}
