//! Differential-evolution search over anchor configurations.

mod anchor_search;
mod de;

pub use anchor_search::{optimize_anchors, optimize_anchors_with, AnchorParamVector, AnchorSearch, RatioMode};
pub use de::{de_optimize, de_optimize_from, DeParams, DeResult};
