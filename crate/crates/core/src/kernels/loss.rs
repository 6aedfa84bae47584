use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_FOCAL_ALPHA: f64 = 0.25;
pub const DEFAULT_FOCAL_GAMMA: f64 = 2.0;

/// Binary focal loss `-alpha_t * (1 - p_t)^gamma * ln(p_t)`.
///
/// `p_t` is `p` for a positive target and `1 - p` otherwise; `alpha_t` follows
/// the same pattern with `alpha_w`.
pub fn focal_loss<T: Scalar>(p: T, positive: bool, alpha_w: T, gamma: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "probability {p} must lie strictly inside (0, 1)"
        )));
    }
    if !(alpha_w >= T::zero() && alpha_w <= T::one()) {
        return Err(Error::InvalidArgument(format!("alpha {alpha_w} outside [0, 1]")));
    }
    if !(gamma >= T::zero()) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must be non-negative")));
    }
    let (p_t, alpha_t) = if positive {
        (p, alpha_w)
    } else {
        (T::one() - p, T::one() - alpha_w)
    };
    Ok(-alpha_t * (T::one() - p_t).powf(gamma) * p_t.ln())
}

/// Smooth L1 summed over coordinates: `0.5 d^2 / beta` inside `|d| < beta`, `|d| - beta / 2` outside.
pub fn smooth_l1<T: Scalar>(pred: &[T], target: &[T], beta: T) -> Result<T> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: pred.len(),
            actual: target.len(),
        });
    }
    if !(beta > T::zero()) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {beta}")));
    }
    let half = T::lit(0.5);
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&a, &b)| {
            let d = (a - b).abs();
            if d < beta {
                half * d * d / beta
            } else {
                d - half * beta
            }
        })
        .sum())
}
