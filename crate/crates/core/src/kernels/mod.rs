//! Numerical kernels: dilated convolution with receptive-field and gridding
//! analysis, the additive attention gate with analytic gradients, and the
//! focal / smooth-L1 training losses.

mod attention;
mod conv;
mod grid;
mod loss;

pub use attention::{
    attention_gate_forward, attention_gate_grad, attention_gate_grad_gated, attention_gate_map, AttentionGateGrads,
    AttentionGateOutput, AttentionGateParams,
};
pub use conv::{dilated_cascade, dilated_conv2d, gridding_index, receptive_field, zero_insert, Padding, GRIDDING_EPS};
pub use grid::Grid2D;
pub use loss::{focal_loss, smooth_l1, DEFAULT_FOCAL_ALPHA, DEFAULT_FOCAL_GAMMA};
