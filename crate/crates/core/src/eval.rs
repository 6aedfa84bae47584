//! Detection-to-ground-truth matching and the precision / recall / F1 / AP metrics.
//!
//! A detection is a true positive when its best-overlapping unmatched
//! ground-truth box of the same label and image has IoU strictly greater
//! than the threshold. Detections are matched greedily by descending score;
//! equal scores keep input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::postprocess::Detection;
use crate::scalar::Scalar;

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct GroundTruth<T> {
    pub bbox: BBox<T>,
    pub label: u64,
    pub image_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// TP flag per detection, in input order.
    pub is_tp: Vec<bool>,
    /// Index of the ground truth consumed by each TP detection.
    pub matched_gt: Vec<Option<usize>>,
    /// Detection indices in matching (descending score) order.
    pub order: Vec<usize>,
    pub tp: usize,
    pub fp: usize,
    /// Ground-truth boxes never matched.
    pub fn_boxes: usize,
    /// Frames holding at least one ground truth but no detection at all.
    pub fn_frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint<T> {
    pub threshold: T,
    pub recall: T,
    pub precision: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve<T> {
    pub points: Vec<PrPoint<T>>,
    pub ap: T,
}

fn score_order<T: Scalar>(dets: &[Detection<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

pub fn match_detections<T: Scalar>(dets: &[Detection<T>], gts: &[GroundTruth<T>], iou_threshold: T) -> MatchResult {
    let mut by_key: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_key.entry((g.image_id, g.label)).or_default().push(i);
    }
    let order = score_order(dets);
    let mut used = vec![false; gts.len()];
    let mut is_tp = vec![false; dets.len()];
    let mut matched_gt = vec![None; dets.len()];

    for &d in &order {
        let det = &dets[d];
        let Some(cands) = by_key.get(&(det.image_id, det.label)) else {
            continue;
        };
        let mut best: Option<(usize, T)> = None;
        for &g in cands.iter().filter(|&&g| !used[g]) {
            let v = det.bbox.iou(&gts[g].bbox);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if v > iou_threshold {
                used[g] = true;
                is_tp[d] = true;
                matched_gt[d] = Some(g);
            }
        }
    }

    let tp = is_tp.iter().filter(|&&t| t).count();
    let det_frames: BTreeSet<u64> = dets.iter().map(|d| d.image_id).collect();
    let gt_frames: BTreeSet<u64> = gts.iter().map(|g| g.image_id).collect();
    MatchResult {
        tp,
        fp: dets.len() - tp,
        fn_boxes: used.iter().filter(|&&u| !u).count(),
        fn_frames: gt_frames.difference(&det_frames).count(),
        is_tp,
        matched_gt,
        order,
    }
}

/// Precision, recall and F1 from raw counts; each is 0 when its denominator is 0.
pub fn precision_recall_f1<T: Scalar>(tp: usize, fp: usize, fn_count: usize) -> Prf<T> {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            T::zero()
        } else {
            T::from_count(num) / T::from_count(den)
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_count);
    let denom = precision + recall;
    let f1 = if denom > T::zero() {
        T::lit(2.0) * precision * recall / denom
    } else {
        T::zero()
    };
    Prf { precision, recall, f1 }
}

impl MatchResult {
    pub fn prf<T: Scalar>(&self) -> Prf<T> {
        precision_recall_f1(self.tp, self.fp, self.fn_boxes)
    }
}

/// Precision-recall sweep and all-points interpolated AP.
///
/// One curve point is emitted per distinct score. AP sums recall increments
/// weighted by the precision envelope `max { p(r') : r' >= r }`.
pub fn average_precision<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruth<T>],
    iou_threshold: T,
) -> Result<PrCurve<T>> {
    if gts.is_empty() {
        return Err(Error::InvalidArgument(
            "average precision needs at least one ground truth".into(),
        ));
    }
    let m = match_detections(dets, gts, iou_threshold);
    let n_gt = T::from_count(gts.len());
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &d) in m.order.iter().enumerate() {
        if m.is_tp[d] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = m.order.get(k + 1).is_none_or(|&n| dets[n].score != dets[d].score);
        if last_of_tie {
            points.push(PrPoint {
                threshold: dets[d].score,
                recall: T::from_count(tp) / n_gt,
                precision: T::from_count(tp) / T::from_count(tp + fp),
            });
        }
    }
    let ap = envelope_area(&points);
    Ok(PrCurve { points, ap })
}

fn envelope_area<T: Scalar>(points: &[PrPoint<T>]) -> T {
    let mut envelope = vec![T::zero(); points.len()];
    let mut running = T::zero();
    for (i, p) in points.iter().enumerate().rev() {
        running = running.max(p.precision);
        envelope[i] = running;
    }
    let mut prev_recall = T::zero();
    let mut ap = T::zero();
    for (p, env) in points.iter().zip(envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap.max(T::zero()).min(T::one())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAp<T> {
    /// `(label, ap)` for every label with ground truth, ascending by label.
    pub per_label: Vec<(u64, T)>,
    pub map: T,
}

/// Mean of per-label AP over labels that have ground truth.
pub fn mean_average_precision<T: Scalar>(
    dets: &[Detection<T>],
    gts: &[GroundTruth<T>],
    iou_threshold: T,
) -> Result<MeanAp<T>> {
    let mut gt_by_label: BTreeMap<u64, Vec<GroundTruth<T>>> = BTreeMap::new();
    for g in gts {
        gt_by_label.entry(g.label).or_default().push(*g);
    }
    if gt_by_label.is_empty() {
        return Err(Error::InvalidArgument(
            "mean average precision needs at least one ground truth".into(),
        ));
    }
    let mut per_label = Vec::with_capacity(gt_by_label.len());
    for (label, label_gts) in &gt_by_label {
        let label_dets: Vec<_> = dets.iter().filter(|d| d.label == *label).copied().collect();
        per_label.push((*label, average_precision(&label_dets, label_gts, iou_threshold)?.ap));
    }
    let map = per_label.iter().map(|(_, ap)| *ap).sum::<T>() / T::from_count(per_label.len());
    Ok(MeanAp { per_label, map })
}
