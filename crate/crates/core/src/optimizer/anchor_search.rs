//! Encoding of anchor configurations as DE parameter vectors.
//!
//! The symmetric encoding is `[ln size_0, .., ln size_{L-1}, ln r_a, ln r_b]`
//! with `r_a, r_b > 1`; it decodes to the five ratios
//! `{1/r2, 1/r1, 1, r1, r2}` where `r1 = min(r_a, r_b)` and `r2 = max(r_a, r_b)`.
//! Octave scales and strides are copied from the base configuration.

use serde::{Deserialize, Serialize};

use super::de::{de_optimize_from, DeParams, DeResult};
use crate::anchors::{coverage, AnchorConfig, PyramidLevel};
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::scalar::Scalar;

pub const MIN_BASE_SIZE: f64 = 8.0;
pub const MAX_BASE_SIZE: f64 = 512.0;
pub const MAX_RATIO: f64 = 4.0;
/// Lower bound on a super-unit ratio, keeping it distinct from 1.
pub const MIN_SUPER_UNIT_RATIO: f64 = 1.001;
/// Number of ratios searched in [`RatioMode::Free`].
pub const FREE_RATIO_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioMode {
    /// Two free super-unit ratios mirrored into five reciprocal-symmetric ratios.
    #[default]
    Symmetric,
    /// Five independent ratios in `[1/4, 4]`.
    Free,
}

/// Decoded view of a parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorParamVector<T> {
    pub log_sizes: Vec<T>,
    /// Symmetric mode: logs of the two super-unit ratios. Free mode: logs of all ratios.
    pub log_ratio_offsets: Vec<T>,
}

impl<T: Scalar> AnchorParamVector<T> {
    pub fn to_vec(&self) -> Vec<T> {
        self.log_sizes.iter().chain(&self.log_ratio_offsets).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSearch<T> {
    pub base: AnchorConfig<T>,
    pub mode: RatioMode,
}

impl<T: Scalar> AnchorSearch<T> {
    pub fn new(base: AnchorConfig<T>, mode: RatioMode) -> Result<Self> {
        base.validate()?;
        Ok(Self { base, mode })
    }

    pub fn levels(&self) -> usize {
        self.base.levels.len()
    }

    fn ratio_dims(&self) -> usize {
        match self.mode {
            RatioMode::Symmetric => 2,
            RatioMode::Free => FREE_RATIO_COUNT,
        }
    }

    pub fn dim(&self) -> usize {
        self.levels() + self.ratio_dims()
    }

    /// Log-space bounds: each level's size in `[max(8, stride/2), min(512, 8 * stride)]`,
    /// super-unit ratios in `[1.001, 4]` (free ratios in `[1/4, 4]`).
    pub fn default_bounds(&self) -> Vec<(T, T)> {
        let mut bounds: Vec<(T, T)> = self
            .base
            .levels
            .iter()
            .map(|l| {
                let stride = l.stride.as_f64();
                let lo = MIN_BASE_SIZE.max(stride / 2.0);
                let hi = MAX_BASE_SIZE.min(stride * 8.0);
                let (lo, hi) = if lo < hi {
                    (lo, hi)
                } else {
                    (MIN_BASE_SIZE, MAX_BASE_SIZE)
                };
                (T::lit(lo.ln()), T::lit(hi.ln()))
            })
            .collect();
        let ratio = match self.mode {
            RatioMode::Symmetric => (T::lit(MIN_SUPER_UNIT_RATIO.ln()), T::lit(MAX_RATIO.ln())),
            RatioMode::Free => (T::lit(-MAX_RATIO.ln()), T::lit(MAX_RATIO.ln())),
        };
        bounds.extend(std::iter::repeat_n(ratio, self.ratio_dims()));
        bounds
    }

    /// Default DE settings over [`Self::default_bounds`].
    pub fn de_params(&self) -> DeParams<T> {
        DeParams::new(self.default_bounds())
    }

    pub fn split(&self, v: &[T]) -> Result<AnchorParamVector<T>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        let (sizes, ratios) = v.split_at(self.levels());
        Ok(AnchorParamVector {
            log_sizes: sizes.to_vec(),
            log_ratio_offsets: ratios.to_vec(),
        })
    }

    pub fn decode(&self, v: &[T]) -> Result<AnchorConfig<T>> {
        let p = self.split(v)?;
        let levels = self
            .base
            .levels
            .iter()
            .zip(&p.log_sizes)
            .map(|(l, &ls)| PyramidLevel {
                name: l.name.clone(),
                stride: l.stride,
                base_size: ls.exp(),
            })
            .collect();
        let ratios = match self.mode {
            RatioMode::Symmetric => {
                let (a, b) = (p.log_ratio_offsets[0].exp(), p.log_ratio_offsets[1].exp());
                let (r1, r2) = if a <= b { (a, b) } else { (b, a) };
                vec![r2.recip(), r1.recip(), T::one(), r1, r2]
            }
            RatioMode::Free => {
                let mut r: Vec<T> = p.log_ratio_offsets.iter().map(|x| x.exp()).collect();
                r.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
                r
            }
        };
        AnchorConfig::new(levels, self.base.octave_scales.clone(), ratios)
    }

    /// Parameter vector for `cfg`, if it has the base's level count and a compatible ratio set.
    ///
    /// Symmetric mode reads the smallest and largest ratio above 1 (a single
    /// one is used twice); free mode needs exactly five ratios.
    pub fn encode(&self, cfg: &AnchorConfig<T>) -> Option<Vec<T>> {
        if cfg.levels.len() != self.levels() {
            return None;
        }
        let mut v: Vec<T> = cfg.levels.iter().map(|l| l.base_size.ln()).collect();
        match self.mode {
            RatioMode::Symmetric => {
                let mut sup: Vec<T> = cfg.ratios.iter().copied().filter(|&r| r > T::one()).collect();
                sup.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
                let (lo, hi) = (sup.first()?, sup.last()?);
                v.push(lo.ln());
                v.push(hi.ln());
            }
            RatioMode::Free => {
                if cfg.ratios.len() != FREE_RATIO_COUNT {
                    return None;
                }
                let mut r = cfg.ratios.clone();
                r.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
                v.extend(r.iter().map(|x| x.ln()));
            }
        }
        Some(v)
    }
}

/// Maximizes mean center-aligned best IoU over `gt` with the symmetric five-ratio encoding.
///
/// The base configuration (encoded, clamped) seeds the initial population.
pub fn optimize_anchors<T: Scalar>(
    gt: &[GroundTruth<T>],
    base_cfg: &AnchorConfig<T>,
    params: &DeParams<T>,
) -> Result<(AnchorConfig<T>, DeResult<T>)> {
    let search = AnchorSearch::new(base_cfg.clone(), RatioMode::Symmetric)?;
    optimize_anchors_with(gt, &search, params)
}

pub fn optimize_anchors_with<T: Scalar>(
    gt: &[GroundTruth<T>],
    search: &AnchorSearch<T>,
    params: &DeParams<T>,
) -> Result<(AnchorConfig<T>, DeResult<T>)> {
    if gt.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if params.dim() != search.dim() {
        return Err(Error::DimensionMismatch {
            expected: search.dim(),
            actual: params.dim(),
        });
    }
    let seeds: Vec<Vec<T>> = search.encode(&search.base).into_iter().collect();
    let objective = |v: &[T]| match search.decode(v) {
        Ok(cfg) => coverage(&cfg, gt).map(|r| r.mean_best_iou).unwrap_or(T::neg_infinity()),
        Err(_) => T::neg_infinity(),
    };
    let result = de_optimize_from(objective, params, &seeds)?;
    let cfg = search.decode(&result.best_vector)?;
    Ok((cfg, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    #[test]
    fn dims_and_bounds() {
        let s = AnchorSearch::new(AnchorConfig::<f64>::retinanet_default(), RatioMode::Symmetric).unwrap();
        assert_eq!(s.dim(), 7);
        let b = s.default_bounds();
        let exp: Vec<(f64, f64)> = b.iter().map(|&(lo, hi)| (lo.exp(), hi.exp())).collect();
        let close = |a: f64, e: f64| (a - e).abs() < 1e-9 * e;
        let want = [(8.0, 64.0), (8.0, 128.0), (16.0, 256.0), (32.0, 512.0), (64.0, 512.0)];
        for (got, w) in exp.iter().zip(want) {
            assert!(close(got.0, w.0) && close(got.1, w.1), "{got:?} vs {w:?}");
        }
        assert!(close(exp[5].0, 1.001) && close(exp[6].1, 4.0));
        let f = AnchorSearch::new(AnchorConfig::<f64>::retinanet_default(), RatioMode::Free).unwrap();
        assert_eq!(f.dim(), 10);
    }

    #[test]
    fn optimized_preset_sizes_lie_inside_default_bounds() {
        let cfg = AnchorConfig::<f64>::paper_optimized();
        let s = AnchorSearch::new(cfg.clone(), RatioMode::Symmetric).unwrap();
        let v = s.encode(&cfg).unwrap();
        for (x, (lo, hi)) in v.iter().zip(s.default_bounds()) {
            assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
        }
    }

    #[test]
    fn decode_is_reciprocal_symmetric() {
        let s = AnchorSearch::new(AnchorConfig::<f64>::retinanet_default(), RatioMode::Symmetric).unwrap();
        let mut v: Vec<f64> = [16.0f64, 32.0, 64.0, 64.0, 64.0].iter().map(|x| x.ln()).collect();
        v.extend([2.0f64.ln(), 1.3f64.ln()]);
        let cfg = s.decode(&v).unwrap();
        assert_eq!(cfg.ratios.len(), 5);
        assert!((cfg.ratios[0] - 0.5).abs() < 1e-15);
        assert!((cfg.ratios[1] - 1.0 / 1.3).abs() < 1e-15);
        assert_eq!(cfg.ratios[2], 1.0);
        assert!((cfg.ratios[3] - 1.3).abs() < 1e-15);
        assert!((cfg.ratios[4] - 2.0).abs() < 1e-15);
        assert_eq!(cfg.anchors_per_location(), 15);
        assert!(cfg.ratios.windows(2).all(|w| w[0] < w[1]));

        let back = s.decode(&s.encode(&cfg).unwrap()).unwrap();
        for (a, b) in back.ratios.iter().zip(&cfg.ratios) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.decode(&v[..6]).is_err());
    }

    #[test]
    fn encode_three_ratio_base_repeats_super_unit() {
        let base = AnchorConfig::<f64>::retinanet_default();
        let s = AnchorSearch::new(base.clone(), RatioMode::Symmetric).unwrap();
        let cfg = s.decode(&s.encode(&base).unwrap()).unwrap();
        let gt: Vec<_> = base
            .all_shapes()
            .into_iter()
            .map(|(w, h)| GroundTruth {
                bbox: BBox::from_center(400.0, 400.0, w, h).unwrap(),
                label: 0,
                image_id: 0,
            })
            .collect();
        let (a, b) = (
            coverage(&cfg, &gt).unwrap().mean_best_iou,
            coverage(&base, &gt).unwrap().mean_best_iou,
        );
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn exact_corpus_reaches_full_coverage() {
        let base = AnchorConfig::<f64>::retinanet_default();
        let (w, h) = base.anchor_shapes(1).unwrap()[5];
        let gt: Vec<_> = (0..20)
            .map(|i| GroundTruth {
                bbox: BBox::from_center(100.0 + i as f64, 120.0, w, h).unwrap(),
                label: 0,
                image_id: i,
            })
            .collect();
        let search = AnchorSearch::new(base.clone(), RatioMode::Symmetric).unwrap();
        let mut p = search.de_params();
        p.max_generations = 20;
        let (cfg, res) = optimize_anchors(&gt, &base, &p).unwrap();
        assert!((res.best_objective - 1.0).abs() < 1e-12);
        assert!((res.history[0] - 1.0).abs() < 1e-12);
        assert!((coverage(&cfg, &gt).unwrap().mean_best_iou - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_corpus_and_wrong_bounds() {
        let base = AnchorConfig::<f64>::retinanet_default();
        let search = AnchorSearch::new(base.clone(), RatioMode::Symmetric).unwrap();
        assert!(matches!(
            optimize_anchors(&[], &base, &search.de_params()),
            Err(Error::EmptyCorpus)
        ));
        let gt = [GroundTruth {
            bbox: BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(),
            label: 0,
            image_id: 0,
        }];
        let p = DeParams::new(vec![(0.0, 1.0); 3]);
        assert!(matches!(
            optimize_anchors(&gt, &base, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
