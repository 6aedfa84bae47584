//! Anchor shapes and dense anchor grids over feature-pyramid levels, plus
//! coverage scoring of an anchor configuration against a ground-truth corpus.
//!
//! Aspect ratios are `width / height` with an area-preserving split: an anchor
//! of size `s` and ratio `r` is `s * sqrt(r)` wide and `s / sqrt(r)` tall.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::{center_aligned_iou_unchecked, BBox};
use crate::scalar::Scalar;

/// Canonical FPN strides for P3..P7.
pub const FPN_STRIDES: [f64; 5] = [8.0, 16.0, 32.0, 64.0, 128.0];
pub const FPN_LEVEL_NAMES: [&str; 5] = ["P3", "P4", "P5", "P6", "P7"];

pub const RETINANET_SIZES: [f64; 5] = [32.0, 64.0, 128.0, 256.0, 512.0];
pub const RETINANET_RATIOS: [f64; 3] = [0.5, 1.0, 2.0];

/// Polyp-tuned sizes and ratios reported for the 15-anchor configuration.
pub const PAPER_OPTIMIZED_SIZES: [f64; 5] = [16.0, 32.0, 64.0, 64.0, 64.0];
pub const PAPER_OPTIMIZED_RATIOS: [f64; 5] = [0.481, 0.741, 1.0, 1.349, 2.078];

/// `(2^0, 2^(1/3), 2^(2/3))`.
pub fn default_octave_scales<T: Scalar>() -> Vec<T> {
    (0..3).map(|i| T::lit(2f64.powf(i as f64 / 3.0))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidLevel<T> {
    pub name: String,
    pub stride: T,
    pub base_size: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig<T> {
    pub levels: Vec<PyramidLevel<T>>,
    pub octave_scales: Vec<T>,
    pub ratios: Vec<T>,
}

impl<T: Scalar> AnchorConfig<T> {
    /// Builds and validates a config.
    pub fn new(levels: Vec<PyramidLevel<T>>, octave_scales: Vec<T>, ratios: Vec<T>) -> Result<Self> {
        let cfg = Self {
            levels,
            octave_scales,
            ratios,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Five P3..P7 levels with canonical strides and the given base sizes.
    pub fn fpn(base_sizes: &[T], octave_scales: Vec<T>, ratios: Vec<T>) -> Result<Self> {
        if base_sizes.len() != FPN_STRIDES.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} base sizes, got {}",
                FPN_STRIDES.len(),
                base_sizes.len()
            )));
        }
        let levels = FPN_LEVEL_NAMES
            .iter()
            .zip(FPN_STRIDES)
            .zip(base_sizes)
            .map(|((name, stride), &base_size)| PyramidLevel {
                name: (*name).to_string(),
                stride: T::lit(stride),
                base_size,
            })
            .collect();
        Self::new(levels, octave_scales, ratios)
    }

    /// Sizes 32..512, three octave scales, ratios 1:2, 1:1, 2:1 (9 anchors per location).
    pub fn retinanet_default() -> Self {
        let sizes: Vec<T> = RETINANET_SIZES.iter().map(|&s| T::lit(s)).collect();
        let ratios = RETINANET_RATIOS.iter().map(|&r| T::lit(r)).collect();
        Self::fpn(&sizes, default_octave_scales(), ratios).expect("preset is valid")
    }

    /// Sizes 16/32/64/64/64, three octave scales, five ratios (15 anchors per location).
    pub fn paper_optimized() -> Self {
        let sizes: Vec<T> = PAPER_OPTIMIZED_SIZES.iter().map(|&s| T::lit(s)).collect();
        let ratios = PAPER_OPTIMIZED_RATIOS.iter().map(|&r| T::lit(r)).collect();
        Self::fpn(&sizes, default_octave_scales(), ratios).expect("preset is valid")
    }

    /// Looks up a named preset: `retinanet-default` or `paper-optimized`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "retinanet-default" => Some(Self::retinanet_default()),
            "paper-optimized" => Some(Self::paper_optimized()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.levels.is_empty() {
            return bad("no pyramid levels".into());
        }
        if self.octave_scales.is_empty() || self.ratios.is_empty() {
            return bad("octave_scales and ratios must be non-empty".into());
        }
        for lvl in &self.levels {
            if !(lvl.stride > T::zero() && lvl.stride.is_finite()) {
                return bad(format!("level {}: stride must be positive", lvl.name));
            }
            if !(lvl.base_size > T::zero() && lvl.base_size.is_finite()) {
                return bad(format!("level {}: base_size must be positive", lvl.name));
            }
        }
        for pair in self.levels.windows(2) {
            if pair[1].stride <= pair[0].stride {
                return bad(format!(
                    "strides must strictly increase ({} -> {})",
                    pair[0].name, pair[1].name
                ));
            }
        }
        if let Some(o) = self.octave_scales.iter().find(|o| !(**o > T::zero() && o.is_finite())) {
            return bad(format!("octave scale {o} must be positive"));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(**r > T::zero() && r.is_finite())) {
            return bad(format!("ratio {r} must be positive"));
        }
        Ok(())
    }

    pub fn anchors_per_location(&self) -> usize {
        self.octave_scales.len() * self.ratios.len()
    }

    /// `(w, h)` anchor shapes at one level, octave-major then ratio.
    pub fn anchor_shapes(&self, level_index: usize) -> Result<Vec<(T, T)>> {
        let level = self.levels.get(level_index).ok_or(Error::LevelOutOfRange {
            index: level_index,
            levels: self.levels.len(),
        })?;
        Ok(shapes_for_size(level.base_size, &self.octave_scales, &self.ratios))
    }

    /// One anchor per shape per grid cell, centers at `((i + 0.5) * stride, (j + 0.5) * stride)`.
    ///
    /// Anchors are not clipped to the image. Boxes are ordered row-major by
    /// cell (`j` outer, `i` inner) and by shape within a cell.
    pub fn anchor_grid(&self, level_index: usize, image_w: T, image_h: T) -> Result<Vec<BBox<T>>> {
        if !(image_w > T::zero() && image_h > T::zero()) {
            return Err(Error::InvalidImageSize {
                width: image_w.as_f64(),
                height: image_h.as_f64(),
            });
        }
        let shapes = self.anchor_shapes(level_index)?;
        let stride = self.levels[level_index].stride;
        let (nx, ny) = grid_dims(stride, image_w, image_h);
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity(nx * ny * shapes.len());
        for j in 0..ny {
            let cy = (T::from_count(j) + half) * stride;
            for i in 0..nx {
                let cx = (T::from_count(i) + half) * stride;
                for &(w, h) in &shapes {
                    out.push(BBox::from_center(cx, cy, w, h)?);
                }
            }
        }
        Ok(out)
    }

    /// Number of anchor boxes `anchor_grid` yields at a level.
    pub fn grid_len(&self, level_index: usize, image_w: T, image_h: T) -> Result<usize> {
        let level = self.levels.get(level_index).ok_or(Error::LevelOutOfRange {
            index: level_index,
            levels: self.levels.len(),
        })?;
        let (nx, ny) = grid_dims(level.stride, image_w, image_h);
        Ok(nx * ny * self.anchors_per_location())
    }

    /// Every anchor shape of every level, flattened.
    pub fn all_shapes(&self) -> Vec<(T, T)> {
        self.levels
            .iter()
            .flat_map(|l| shapes_for_size(l.base_size, &self.octave_scales, &self.ratios))
            .collect()
    }
}

fn shapes_for_size<T: Scalar>(base: T, octaves: &[T], ratios: &[T]) -> Vec<(T, T)> {
    let mut shapes = Vec::with_capacity(octaves.len() * ratios.len());
    for &o in octaves {
        let s = base * o;
        for &r in ratios {
            let sr = r.sqrt();
            shapes.push((s * sr, s / sr));
        }
    }
    shapes
}

fn grid_dims<T: Scalar>(stride: T, image_w: T, image_h: T) -> (usize, usize) {
    let nx = (image_w / stride).ceil().to_usize().unwrap_or(0).max(1);
    let ny = (image_h / stride).ceil().to_usize().unwrap_or(0).max(1);
    (nx, ny)
}

/// How a ground-truth box is compared against a configuration's anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageMode<T> {
    /// Shapes only, with the anchor centered on the object.
    CenterAligned,
    /// Best IoU over the actual anchor grid of a `image_w x image_h` image.
    FullGrid { image_w: T, image_h: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport<T> {
    pub boxes: usize,
    pub mean_best_iou: T,
    pub min_best_iou: T,
    /// Fraction of boxes whose best IoU is at least 0.5.
    pub frac_at_least_half: T,
}

/// Center-aligned coverage of `gt` by `cfg`.
pub fn coverage<T: Scalar>(cfg: &AnchorConfig<T>, gt: &[GroundTruth<T>]) -> Result<CoverageReport<T>> {
    coverage_with(cfg, gt, CoverageMode::CenterAligned)
}

pub fn coverage_with<T: Scalar>(
    cfg: &AnchorConfig<T>,
    gt: &[GroundTruth<T>],
    mode: CoverageMode<T>,
) -> Result<CoverageReport<T>> {
    if gt.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let best = best_ious(cfg, gt, mode)?;
    Ok(summarize(&best))
}

/// Per-box best IoU, in corpus order.
pub fn best_ious<T: Scalar>(cfg: &AnchorConfig<T>, gt: &[GroundTruth<T>], mode: CoverageMode<T>) -> Result<Vec<T>> {
    cfg.validate()?;
    match mode {
        CoverageMode::CenterAligned => {
            let shapes = cfg.all_shapes();
            Ok(gt
                .par_iter()
                .map(|g| best_shape_iou(&shapes, (g.bbox.width(), g.bbox.height())))
                .collect())
        }
        CoverageMode::FullGrid { image_w, image_h } => {
            if !(image_w > T::zero() && image_h > T::zero()) {
                return Err(Error::InvalidImageSize {
                    width: image_w.as_f64(),
                    height: image_h.as_f64(),
                });
            }
            let per_level: Vec<_> = cfg
                .levels
                .iter()
                .map(|l| {
                    let (nx, ny) = grid_dims(l.stride, image_w, image_h);
                    (
                        l.stride,
                        nx,
                        ny,
                        shapes_for_size(l.base_size, &cfg.octave_scales, &cfg.ratios),
                    )
                })
                .collect();
            gt.par_iter()
                .map(|g| {
                    let mut best = T::zero();
                    for (stride, nx, ny, shapes) in &per_level {
                        // for a fixed shape, the nearest cell center on each axis maximizes overlap
                        let (cx, cy) = g.bbox.center();
                        let ax = nearest_center(cx, *stride, *nx);
                        let ay = nearest_center(cy, *stride, *ny);
                        for &(w, h) in shapes {
                            let anchor = BBox::from_center(ax, ay, w, h)?;
                            best = best.max(g.bbox.iou(&anchor));
                        }
                    }
                    Ok(best)
                })
                .collect()
        }
    }
}

fn nearest_center<T: Scalar>(c: T, stride: T, n: usize) -> T {
    let last = T::from_count(n - 1);
    let idx = (c / stride).floor().max(T::zero()).min(last);
    (idx + T::lit(0.5)) * stride
}

#[inline]
fn best_shape_iou<T: Scalar>(shapes: &[(T, T)], target: (T, T)) -> T {
    if !(target.0 > T::zero() && target.1 > T::zero()) {
        return T::zero();
    }
    shapes
        .iter()
        .map(|&s| center_aligned_iou_unchecked(target, s))
        .fold(T::zero(), T::max)
}

impl<T: Scalar> CoverageReport<T> {
    /// Summary of per-box best IoUs.
    pub fn from_best_ious(best: &[T]) -> Result<Self> {
        if best.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(summarize(best))
    }
}

fn summarize<T: Scalar>(best: &[T]) -> CoverageReport<T> {
    let n = T::from_count(best.len());
    let sum: T = best.iter().copied().sum();
    let min = best.iter().copied().fold(T::infinity(), T::min);
    let hits = best.iter().filter(|&&b| b >= T::lit(0.5)).count();
    CoverageReport {
        boxes: best.len(),
        mean_best_iou: sum / n,
        min_best_iou: min,
        frac_at_least_half: T::from_count(hits) / n,
    }
}
