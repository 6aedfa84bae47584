//! Additive attention gate.
//!
//! ```text
//! h     = relu(W_x^T x + W_g^T g + b_xg)
//! q     = psi^T h + b_psi
//! alpha = logistic(q)
//! out   = alpha * x
//! ```
//!
//! Weight matrices are stored row-major: `w_x[i * d_int + j]` is `W_x[i][j]`.

use serde::{Deserialize, Serialize};

use super::grid::Grid2D;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionGateParams<T> {
    pub d_x: usize,
    pub d_g: usize,
    pub d_int: usize,
    pub w_x: Vec<T>,
    pub w_g: Vec<T>,
    pub b_xg: Vec<T>,
    pub psi: Vec<T>,
    pub b_psi: T,
}

impl<T: Scalar> AttentionGateParams<T> {
    pub fn zeros(d_x: usize, d_g: usize, d_int: usize) -> Self {
        Self {
            d_x,
            d_g,
            d_int,
            w_x: vec![T::zero(); d_x * d_int],
            w_g: vec![T::zero(); d_g * d_int],
            b_xg: vec![T::zero(); d_int],
            psi: vec![T::zero(); d_int],
            b_psi: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |expected: usize, actual: usize| {
            if expected == actual {
                Ok(())
            } else {
                Err(Error::DimensionMismatch { expected, actual })
            }
        };
        check(self.d_x * self.d_int, self.w_x.len())?;
        check(self.d_g * self.d_int, self.w_g.len())?;
        check(self.d_int, self.b_xg.len())?;
        check(self.d_int, self.psi.len())
    }

    fn check_inputs(&self, x: &[T], g: &[T]) -> Result<()> {
        self.validate()?;
        if x.len() != self.d_x {
            return Err(Error::DimensionMismatch {
                expected: self.d_x,
                actual: x.len(),
            });
        }
        if g.len() != self.d_g {
            return Err(Error::DimensionMismatch {
                expected: self.d_g,
                actual: g.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations `W_x^T x + W_g^T g + b_xg`.
    pub fn pre_activation(&self, x: &[T], g: &[T]) -> Result<Vec<T>> {
        self.check_inputs(x, g)?;
        Ok(self.pre_unchecked(x, g))
    }

    fn pre_unchecked(&self, x: &[T], g: &[T]) -> Vec<T> {
        let mut pre = self.b_xg.clone();
        for (i, &xi) in x.iter().enumerate() {
            for (j, p) in pre.iter_mut().enumerate() {
                *p += self.w_x[i * self.d_int + j] * xi;
            }
        }
        for (i, &gi) in g.iter().enumerate() {
            for (j, p) in pre.iter_mut().enumerate() {
                *p += self.w_g[i * self.d_int + j] * gi;
            }
        }
        pre
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionGateOutput<T> {
    pub alpha: T,
    pub gated: Vec<T>,
}

/// Gradients with the same layout as the inputs and [`AttentionGateParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionGateGrads<T> {
    pub x: Vec<T>,
    pub g: Vec<T>,
    pub w_x: Vec<T>,
    pub w_g: Vec<T>,
    pub b_xg: Vec<T>,
    pub psi: Vec<T>,
    pub b_psi: T,
}

fn logistic<T: Scalar>(q: T) -> T {
    T::one() / (T::one() + (-q).exp())
}

fn relu<T: Scalar>(v: T) -> T {
    v.max(T::zero())
}

pub fn attention_gate_forward<T: Scalar>(
    x: &[T],
    g: &[T],
    params: &AttentionGateParams<T>,
) -> Result<AttentionGateOutput<T>> {
    params.check_inputs(x, g)?;
    let pre = params.pre_unchecked(x, g);
    let q = pre.iter().zip(&params.psi).map(|(&p, &w)| relu(p) * w).sum::<T>() + params.b_psi;
    let alpha = logistic(q);
    Ok(AttentionGateOutput {
        alpha,
        gated: x.iter().map(|&v| alpha * v).collect(),
    })
}

/// Gradient of `upstream * alpha` with respect to every input and parameter.
///
/// The rectifier's subgradient at 0 is taken as 0.
pub fn attention_gate_grad<T: Scalar>(
    x: &[T],
    g: &[T],
    params: &AttentionGateParams<T>,
    upstream: T,
) -> Result<AttentionGateGrads<T>> {
    params.check_inputs(x, g)?;
    let pre = params.pre_unchecked(x, g);
    let h: Vec<T> = pre.iter().map(|&p| relu(p)).collect();
    let q = h.iter().zip(&params.psi).map(|(&hj, &w)| hj * w).sum::<T>() + params.b_psi;
    let alpha = logistic(q);
    let dq = upstream * alpha * (T::one() - alpha);

    // d(out)/d(pre_j)
    let dpre: Vec<T> = pre
        .iter()
        .zip(&params.psi)
        .map(|(&p, &w)| if p > T::zero() { dq * w } else { T::zero() })
        .collect();
    let d_int = params.d_int;

    let outer = |v: &[T]| -> Vec<T> {
        let mut m = Vec::with_capacity(v.len() * d_int);
        for &vi in v {
            m.extend(dpre.iter().map(|&d| d * vi));
        }
        m
    };
    let through = |w: &[T], n: usize| -> Vec<T> {
        (0..n)
            .map(|i| (0..d_int).map(|j| w[i * d_int + j] * dpre[j]).sum())
            .collect()
    };

    Ok(AttentionGateGrads {
        x: through(&params.w_x, params.d_x),
        g: through(&params.w_g, params.d_g),
        w_x: outer(x),
        w_g: outer(g),
        b_xg: dpre.clone(),
        psi: h.iter().map(|&hj| dq * hj).collect(),
        b_psi: dq,
    })
}

/// Gradient of `<upstream, alpha * x>`.
///
/// The alpha path is scaled by `<upstream, x>`, so it vanishes when `x = 0`;
/// the direct path adds `alpha * upstream` to the `x` gradient.
pub fn attention_gate_grad_gated<T: Scalar>(
    x: &[T],
    g: &[T],
    params: &AttentionGateParams<T>,
    upstream: &[T],
) -> Result<AttentionGateGrads<T>> {
    if upstream.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: upstream.len(),
        });
    }
    let through_alpha = upstream.iter().zip(x).map(|(&u, &v)| u * v).sum::<T>();
    let mut grads = attention_gate_grad(x, g, params, through_alpha)?;
    let alpha = attention_gate_forward(x, g, params)?.alpha;
    for (gx, &u) in grads.x.iter_mut().zip(upstream) {
        *gx += alpha * u;
    }
    Ok(grads)
}

/// Applies the gate independently at every spatial position of channel-stacked grids.
///
/// Returns the attention map and the gated `x` channels.
pub fn attention_gate_map<T: Scalar>(
    x: &[Grid2D<T>],
    g: &[Grid2D<T>],
    params: &AttentionGateParams<T>,
) -> Result<(Grid2D<T>, Vec<Grid2D<T>>)> {
    let first = x
        .first()
        .or(g.first())
        .ok_or(Error::InvalidArgument("no channels".into()))?;
    let (w, h) = (first.width(), first.height());
    if x.iter().chain(g).any(|c| c.width() != w || c.height() != h) {
        return Err(Error::InvalidArgument(
            "all channels must share one spatial size".into(),
        ));
    }
    let mut alpha_map = Grid2D::zeros(w, h);
    let mut gated: Vec<Grid2D<T>> = x.iter().map(|_| Grid2D::zeros(w, h)).collect();
    let mut xv = vec![T::zero(); x.len()];
    let mut gv = vec![T::zero(); g.len()];
    for py in 0..h {
        for px in 0..w {
            for (v, c) in xv.iter_mut().zip(x) {
                *v = c.get(px, py);
            }
            for (v, c) in gv.iter_mut().zip(g) {
                *v = c.get(px, py);
            }
            let out = attention_gate_forward(&xv, &gv, params)?;
            alpha_map.set(px, py, out.alpha);
            for (c, v) in gated.iter_mut().zip(out.gated) {
                c.set(px, py, v);
            }
        }
    }
    Ok((alpha_map, gated))
}
