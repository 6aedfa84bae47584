//! Detector-side mathematics for small-object detection: FPN anchor grids,
//! differential-evolution anchor optimization, Soft-NMS, detection metrics,
//! and verified kernels for dilated convolution and additive attention gates.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64` /
//! `*32` aliases below name the concrete instantiations. File I/O works in
//! `f64`.

// `!(a < b)` is how NaN-rejecting range checks are spelled here
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod kernels;
pub mod optimizer;
pub mod oracle;
pub mod postprocess;
pub mod scalar;

pub use anchors::{coverage, coverage_with, AnchorConfig, CoverageMode, CoverageReport, PyramidLevel};
pub use error::{Error, Result};
pub use eval::{
    average_precision, match_detections, mean_average_precision, precision_recall_f1, GroundTruth, MatchResult,
    PrCurve, Prf,
};
pub use geometry::{center_aligned_iou, iou, BBox};
pub use optimizer::{de_optimize, optimize_anchors, DeParams, DeResult};
pub use postprocess::{hard_nms, soft_nms, DecayMethod, Detection, SoftNmsParams};
pub use scalar::Scalar;

pub type BBox64 = BBox<f64>;
pub type BBox32 = BBox<f32>;
pub type Detection64 = Detection<f64>;
pub type Detection32 = Detection<f32>;
pub type GroundTruth64 = GroundTruth<f64>;
pub type GroundTruth32 = GroundTruth<f32>;
pub type AnchorConfig64 = AnchorConfig<f64>;
pub type AnchorConfig32 = AnchorConfig<f32>;
pub type DeParams64 = DeParams<f64>;
pub type DeResult64 = DeResult<f64>;
pub type Grid64 = kernels::Grid2D<f64>;
pub type Grid32 = kernels::Grid2D<f32>;
pub type SoftNmsParams64 = SoftNmsParams<f64>;
