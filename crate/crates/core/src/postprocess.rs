//! Greedy suppression of overlapping detections: hard NMS and Soft-NMS.
//!
//! Suppression only ever happens between detections that share both
//! `image_id` and `label`. Ties in score are broken by smaller `y1`, then
//! smaller `x1`, then input position, so output order is fully determined.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::scalar::Scalar;

pub const DEFAULT_SOFT_NMS_IOU: f64 = 0.3;
pub const DEFAULT_SOFT_NMS_SIGMA: f64 = 0.5;
pub const DEFAULT_SCORE_FLOOR: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Detection<T> {
    pub bbox: BBox<T>,
    pub score: T,
    pub label: u64,
    pub image_id: u64,
}

impl<T: Scalar> Detection<T> {
    pub fn new(bbox: BBox<T>, score: T, label: u64, image_id: u64) -> Result<Self> {
        if !(score >= T::zero() && score <= T::one()) {
            return Err(Error::InvalidScore { score: score.as_f64() });
        }
        Ok(Self {
            bbox,
            score,
            label,
            image_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayMethod {
    Linear,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftNmsParams<T> {
    pub method: DecayMethod,
    /// Overlap above which linear decay applies (`Nt`).
    pub iou_threshold: T,
    /// Gaussian width; decay factor is `exp(-iou^2 / sigma)`.
    pub sigma: T,
    /// Detections scoring below this are dropped.
    pub score_floor: T,
}

impl<T: Scalar> SoftNmsParams<T> {
    pub fn new(method: DecayMethod) -> Self {
        Self {
            method,
            iou_threshold: T::lit(DEFAULT_SOFT_NMS_IOU),
            sigma: T::lit(DEFAULT_SOFT_NMS_SIGMA),
            score_floor: T::lit(DEFAULT_SCORE_FLOOR),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.iou_threshold >= T::zero() && self.iou_threshold <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "iou threshold {} outside [0, 1]",
                self.iou_threshold
            )));
        }
        if self.method == DecayMethod::Gaussian && !(self.sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Multiplicative decay for a detection overlapping the current maximum by `iou`.
    pub fn decay(&self, iou: T) -> T {
        match self.method {
            DecayMethod::Linear if iou > self.iou_threshold => T::one() - iou,
            DecayMethod::Linear => T::one(),
            DecayMethod::Gaussian if iou > T::zero() => (-(iou * iou) / self.sigma).exp(),
            DecayMethod::Gaussian => T::one(),
        }
    }
}

/// Rank order: higher score first, then smaller y1, smaller x1, earlier input.
fn rank<T: Scalar>(a: (usize, T, &BBox<T>), b: (usize, T, &BBox<T>)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.2.y1().partial_cmp(&b.2.y1()).unwrap_or(Ordering::Equal))
        .then_with(|| a.2.x1().partial_cmp(&b.2.x1()).unwrap_or(Ordering::Equal))
        .then_with(|| a.0.cmp(&b.0))
}

fn group_indices<T>(dets: &[Detection<T>]) -> BTreeMap<(u64, u64), Vec<usize>> {
    let mut groups: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        groups.entry((d.image_id, d.label)).or_default().push(i);
    }
    groups
}

fn sort_ranked<T: Scalar>(mut kept: Vec<(usize, Detection<T>)>) -> Vec<Detection<T>> {
    kept.sort_by(|a, b| rank((a.0, a.1.score, &a.1.bbox), (b.0, b.1.score, &b.1.bbox)));
    kept.into_iter().map(|(_, d)| d).collect()
}

/// Greedy NMS: drops any detection overlapping an already kept one by more than `iou_threshold`.
pub fn hard_nms<T: Scalar>(dets: &[Detection<T>], iou_threshold: T) -> Vec<Detection<T>> {
    let mut kept = Vec::new();
    for idx in group_indices(dets).into_values() {
        let mut order = idx;
        order.sort_by(|&a, &b| rank((a, dets[a].score, &dets[a].bbox), (b, dets[b].score, &dets[b].bbox)));
        let mut group_kept: Vec<usize> = Vec::new();
        for i in order {
            if group_kept
                .iter()
                .all(|&k| dets[k].bbox.iou(&dets[i].bbox) <= iou_threshold)
            {
                group_kept.push(i);
            }
        }
        kept.extend(group_kept.into_iter().map(|i| (i, dets[i])));
    }
    sort_ranked(kept)
}

/// Soft-NMS with linear or Gaussian score decay.
pub fn soft_nms<T: Scalar>(dets: &[Detection<T>], params: &SoftNmsParams<T>) -> Result<Vec<Detection<T>>> {
    params.validate()?;
    let mut kept = Vec::new();
    for idx in group_indices(dets).into_values() {
        let mut pending: Vec<(usize, Detection<T>)> = idx
            .into_iter()
            .map(|i| (i, dets[i]))
            .filter(|(_, d)| d.score >= params.score_floor)
            .collect();
        while !pending.is_empty() {
            let top = (0..pending.len())
                .min_by(|&a, &b| {
                    let (ia, da) = &pending[a];
                    let (ib, db) = &pending[b];
                    rank((*ia, da.score, &da.bbox), (*ib, db.score, &db.bbox))
                })
                .expect("pending is non-empty");
            let (top_idx, top_det) = pending.swap_remove(top);
            for (_, d) in pending.iter_mut() {
                d.score *= params.decay(top_det.bbox.iou(&d.bbox));
            }
            pending.retain(|(_, d)| d.score >= params.score_floor);
            kept.push((top_idx, top_det));
        }
    }
    Ok(sort_ranked(kept))
}
