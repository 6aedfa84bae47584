//! Seeded synthetic ground-truth corpora with known shape distributions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::corpus::{Category, Corpus, ImageInfo, LoadOptions};
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::BBox;

const MAX_SIZE_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedRatio {
    /// Width / height.
    pub ratio: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub images: usize,
    /// Inclusive image width range in pixels.
    pub width_range: (u32, u32),
    pub height_range: (u32, u32),
    /// Inclusive range of boxes per image.
    pub boxes_per_image: (usize, usize),
    /// Log-uniform bounds on box size `sqrt(w * h)`, pixels.
    pub size_range: (f64, f64),
    pub ratios: Vec<WeightedRatio>,
    #[serde(default = "default_label")]
    pub label: u64,
    pub seed: u64,
}

fn default_label() -> u64 {
    1
}

impl SyntheticSpec {
    /// 300x300 images, 1-3 boxes each, sizes log-uniform in 8..96 px, ratios 1:2, 1:1, 2:1.
    pub fn small_polyp(images: usize, seed: u64) -> Self {
        let third = 1.0 / 3.0;
        Self {
            images,
            width_range: (300, 300),
            height_range: (300, 300),
            boxes_per_image: (1, 3),
            size_range: (8.0, 96.0),
            ratios: [0.5, 1.0, 2.0]
                .iter()
                .map(|&ratio| WeightedRatio { ratio, weight: third })
                .collect(),
            label: default_label(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.images == 0 {
            return bad("image count must be positive".into());
        }
        let (w0, w1) = self.width_range;
        let (h0, h1) = self.height_range;
        if w0 == 0 || h0 == 0 || w0 > w1 || h0 > h1 {
            return bad(format!(
                "invalid image size ranges {:?} / {:?}",
                self.width_range, self.height_range
            ));
        }
        if self.boxes_per_image.0 > self.boxes_per_image.1 {
            return bad(format!("invalid boxes-per-image range {:?}", self.boxes_per_image));
        }
        let (s0, s1) = self.size_range;
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return bad(format!("invalid size range {:?}", self.size_range));
        }
        if self.ratios.is_empty() {
            return bad("ratio set is empty".into());
        }
        if self
            .ratios
            .iter()
            .any(|r| !(r.ratio > 0.0 && r.ratio.is_finite()) || !(r.weight >= 0.0))
        {
            return bad("ratios must be positive and weights non-negative".into());
        }
        let total: f64 = self.ratios.iter().map(|r| r.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("ratio weights sum to {total}, expected 1"));
        }
        for r in &self.ratios {
            let sr = r.ratio.sqrt();
            if s0 * sr > w0 as f64 || s0 / sr > h0 as f64 {
                return Err(Error::InfeasibleSpec(format!(
                    "minimum size {s0} at ratio {} does not fit a {w0}x{h0} image",
                    r.ratio
                )));
            }
        }
        Ok(())
    }
}

/// Sampled shape parameters of one generated box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxTruth {
    pub image_id: u64,
    pub ratio: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMetadata {
    pub spec: SyntheticSpec,
    pub boxes: Vec<BoxTruth>,
    /// `(ratio, count)` in spec order.
    pub ratio_counts: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub metadata: SyntheticMetadata,
}

pub fn synthesize(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (ls0, ls1) = (spec.size_range.0.ln(), spec.size_range.1.ln());
    let mut images = Vec::with_capacity(spec.images);
    let mut gts = Vec::new();
    let mut truths = Vec::new();
    let mut counts = vec![0usize; spec.ratios.len()];

    for id in 0..spec.images as u64 {
        let width = rng.random_range(spec.width_range.0..=spec.width_range.1);
        let height = rng.random_range(spec.height_range.0..=spec.height_range.1);
        images.push(ImageInfo { id, width, height });
        let n = rng.random_range(spec.boxes_per_image.0..=spec.boxes_per_image.1);
        for _ in 0..n {
            let k = pick_weighted(&spec.ratios, rng.random::<f64>());
            let ratio = spec.ratios[k].ratio;
            let sr = ratio.sqrt();
            let mut drawn = None;
            for _ in 0..MAX_SIZE_DRAWS {
                let size = (ls0 + (ls1 - ls0) * rng.random::<f64>()).exp();
                let (w, h) = (size * sr, size / sr);
                if w <= width as f64 && h <= height as f64 {
                    drawn = Some((size, w, h));
                    break;
                }
            }
            let (size, w, h) = drawn.ok_or_else(|| {
                Error::InfeasibleSpec(format!(
                    "no size in range fits image {id} ({width}x{height}) at ratio {ratio}"
                ))
            })?;
            let x1 = (width as f64 - w) * rng.random::<f64>();
            let y1 = (height as f64 - h) * rng.random::<f64>();
            let x2 = (x1 + w).min(width as f64);
            let y2 = (y1 + h).min(height as f64);
            gts.push(GroundTruth {
                bbox: BBox::new(x1, y1, x2, y2)?,
                label: spec.label,
                image_id: id,
            });
            truths.push(BoxTruth {
                image_id: id,
                ratio,
                size,
            });
            counts[k] += 1;
        }
    }

    let categories = vec![Category {
        id: spec.label,
        name: "polyp".into(),
    }];
    let corpus = Corpus::new(images, gts, categories, LoadOptions::default())?;
    let ratio_counts = spec.ratios.iter().zip(counts).map(|(r, c)| (r.ratio, c)).collect();
    Ok(SyntheticCorpus {
        corpus,
        metadata: SyntheticMetadata {
            spec: spec.clone(),
            boxes: truths,
            ratio_counts,
        },
    })
}

fn pick_weighted(ratios: &[WeightedRatio], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, r) in ratios.iter().enumerate() {
        acc += r.weight;
        if u < acc {
            return k;
        }
    }
    ratios.len() - 1
}
