//! Independent reference implementations used to cross-check the optimized
//! code paths, plus the invariant suite behind `detkit kernel-check`.
//!
//! Everything here is deliberately naive: plain loops, no shared helpers with
//! the modules under test beyond box IoU.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eval::GroundTruth;
use crate::kernels::{
    attention_gate_forward, attention_gate_grad, dilated_conv2d, gridding_index, receptive_field, smooth_l1,
    AttentionGateParams, Grid2D, Padding,
};
use crate::kernels::{focal_loss, AttentionGateGrads};
use crate::postprocess::{DecayMethod, Detection, SoftNmsParams};

/// Tolerance for the convolution equivalence and linearity checks.
pub const CONV_TOL: f64 = 1e-12;
/// Relative error bound for analytic vs. central-difference gradients.
pub const GRAD_REL_TOL: f64 = 1e-5;
/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Magnitude floor in the relative-error denominator, so exactly-zero gradients compare absolutely.
pub const GRAD_REL_FLOOR: f64 = 1e-4;
/// Minimum distance of every rectifier pre-activation from 0 for a draw to count as kink-free.
pub const KINK_MARGIN: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Convolution

/// Kernel with `rate - 1` zeros between neighbouring taps.
pub fn zero_inserted_kernel(k: &Grid2D<f64>, rate: usize) -> Grid2D<f64> {
    let w = (k.width() - 1) * rate + 1;
    let h = (k.height() - 1) * rate + 1;
    let mut v = vec![0.0; w * h];
    for y in 0..k.height() {
        for x in 0..k.width() {
            v[(y * rate) * w + x * rate] = k.get(x, y);
        }
    }
    Grid2D::new(w, h, v).expect("consistent size")
}

/// Textbook 2-D convolution with a centered odd kernel; `same` zero-pads, otherwise valid.
pub fn standard_conv2d(f: &Grid2D<f64>, k: &Grid2D<f64>, same: bool) -> Grid2D<f64> {
    let (kw, kh) = (k.width() as i64, k.height() as i64);
    let (cx, cy) = (kw / 2, kh / 2);
    let (fw, fh) = (f.width() as i64, f.height() as i64);
    let (ow, oh, sx, sy) = if same {
        (fw, fh, 0, 0)
    } else {
        (fw - kw + 1, fh - kh + 1, cx, cy)
    };
    let mut out = vec![0.0; (ow * oh) as usize];
    for oy in 0..oh {
        for ox in 0..ow {
            let (px, py) = (ox + sx, oy + sy);
            let mut s = 0.0;
            for b in 0..kh {
                for a in 0..kw {
                    let (ix, iy) = (px - (a - cx), py - (b - cy));
                    if ix >= 0 && iy >= 0 && ix < fw && iy < fh {
                        s += f.get(ix as usize, iy as usize) * k.get(a as usize, b as usize);
                    }
                }
            }
            out[(oy * ow + ox) as usize] = s;
        }
    }
    Grid2D::new(ow as usize, oh as usize, out).expect("consistent size")
}

// ---------------------------------------------------------------------------
// Attention gate

/// Scalar-loop evaluation of the gate's `alpha`.
pub fn attention_alpha_scalar(x: &[f64], g: &[f64], p: &AttentionGateParams<f64>) -> f64 {
    let mut q = p.b_psi;
    for j in 0..p.d_int {
        let mut s = p.b_xg[j];
        for (i, xi) in x.iter().enumerate() {
            s += p.w_x[i * p.d_int + j] * xi;
        }
        for (i, gi) in g.iter().enumerate() {
            s += p.w_g[i * p.d_int + j] * gi;
        }
        if s > 0.0 {
            q += p.psi[j] * s;
        }
    }
    1.0 / (1.0 + (-q).exp())
}

/// Central-difference gradient of `alpha` with respect to every input and parameter.
pub fn attention_fd_grads(x: &[f64], g: &[f64], p: &AttentionGateParams<f64>, h: f64) -> AttentionGateGrads<f64> {
    let diff = |plus: f64, minus: f64| (plus - minus) / (2.0 * h);
    let along = |v: &[f64], f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
        (0..v.len())
            .map(|i| {
                let mut a = v.to_vec();
                let mut b = v.to_vec();
                a[i] += h;
                b[i] -= h;
                diff(f(&a), f(&b))
            })
            .collect()
    };
    let with = |edit: &dyn Fn(&mut AttentionGateParams<f64>)| {
        let mut q = p.clone();
        edit(&mut q);
        attention_alpha_scalar(x, g, &q)
    };
    AttentionGateGrads {
        x: along(x, &|v| attention_alpha_scalar(v, g, p)),
        g: along(g, &|v| attention_alpha_scalar(x, v, p)),
        w_x: along(&p.w_x, &|v| with(&|q| q.w_x = v.to_vec())),
        w_g: along(&p.w_g, &|v| with(&|q| q.w_g = v.to_vec())),
        b_xg: along(&p.b_xg, &|v| with(&|q| q.b_xg = v.to_vec())),
        psi: along(&p.psi, &|v| with(&|q| q.psi = v.to_vec())),
        b_psi: diff(with(&|q| q.b_psi += h), with(&|q| q.b_psi -= h)),
    }
}

pub fn grad_rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_REL_FLOOR)
}

/// Largest relative error over all gradient entries.
pub fn max_grad_rel_err(a: &AttentionGateGrads<f64>, b: &AttentionGateGrads<f64>) -> f64 {
    let pairs = [
        (&a.x, &b.x),
        (&a.g, &b.g),
        (&a.w_x, &b.w_x),
        (&a.w_g, &b.w_g),
        (&a.b_xg, &b.b_xg),
        (&a.psi, &b.psi),
    ];
    pairs
        .iter()
        .flat_map(|(u, v)| u.iter().zip(v.iter()).map(|(p, q)| grad_rel_err(*p, *q)))
        .fold(grad_rel_err(a.b_psi, b.b_psi), f64::max)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Random gate instance (dims in `1..=max_dim`) whose pre-activations all clear [`KINK_MARGIN`].
pub fn random_gate_instance(rng: &mut ChaCha8Rng, max_dim: usize) -> (Vec<f64>, Vec<f64>, AttentionGateParams<f64>) {
    loop {
        let d_x = rng.random_range(1..=max_dim);
        let d_g = rng.random_range(1..=max_dim);
        let d_int = rng.random_range(1..=max_dim);
        let p = AttentionGateParams {
            d_x,
            d_g,
            d_int,
            w_x: uniform_vec(rng, d_x * d_int),
            w_g: uniform_vec(rng, d_g * d_int),
            b_xg: uniform_vec(rng, d_int),
            psi: uniform_vec(rng, d_int),
            b_psi: rng.random_range(-1.0..1.0),
        };
        let x = uniform_vec(rng, d_x);
        let g = uniform_vec(rng, d_g);
        let pre = p.pre_activation(&x, &g).expect("consistent dims");
        if pre.iter().all(|v| v.abs() > KINK_MARGIN) {
            return (x, g, p);
        }
    }
}

// ---------------------------------------------------------------------------
// Soft-NMS

/// Scalar Soft-NMS in the classic in-place swap formulation, per `(image, label)`.
pub fn soft_nms_reference(dets: &[Detection<f64>], p: &SoftNmsParams<f64>) -> Vec<Detection<f64>> {
    let keys: BTreeSet<(u64, u64)> = dets.iter().map(|d| (d.image_id, d.label)).collect();
    // before(a, b): a outranks b
    let before = |a: &(usize, Detection<f64>), b: &(usize, Detection<f64>)| -> bool {
        if a.1.score != b.1.score {
            return a.1.score > b.1.score;
        }
        if a.1.bbox.y1() != b.1.bbox.y1() {
            return a.1.bbox.y1() < b.1.bbox.y1();
        }
        if a.1.bbox.x1() != b.1.bbox.x1() {
            return a.1.bbox.x1() < b.1.bbox.x1();
        }
        a.0 < b.0
    };
    let mut kept: Vec<(usize, Detection<f64>)> = Vec::new();
    for key in keys {
        let mut v: Vec<(usize, Detection<f64>)> = dets
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, d)| (d.image_id, d.label) == key && d.score >= p.score_floor)
            .collect();
        let mut n = v.len();
        let mut i = 0;
        while i < n {
            let mut m = i;
            for j in i + 1..n {
                if before(&v[j], &v[m]) {
                    m = j;
                }
            }
            v.swap(i, m);
            let top = v[i].1.bbox;
            let mut pos = i + 1;
            while pos < n {
                let u = top.iou(&v[pos].1.bbox);
                let w = match p.method {
                    DecayMethod::Linear => {
                        if u > p.iou_threshold {
                            1.0 - u
                        } else {
                            1.0
                        }
                    }
                    DecayMethod::Gaussian => (-(u * u) / p.sigma).exp(),
                };
                v[pos].1.score *= w;
                if v[pos].1.score < p.score_floor {
                    // keep relative order of the survivors
                    v.remove(pos);
                    n -= 1;
                } else {
                    pos += 1;
                }
            }
            i += 1;
        }
        kept.extend(v.into_iter().take(n));
    }
    // insertion sort by rank
    let mut out: Vec<(usize, Detection<f64>)> = Vec::with_capacity(kept.len());
    for item in kept {
        let at = out.iter().position(|o| before(&item, o)).unwrap_or(out.len());
        out.insert(at, item);
    }
    out.into_iter().map(|(_, d)| d).collect()
}

// ---------------------------------------------------------------------------
// Average precision

/// AP by enumerating every score threshold and re-matching the surviving detections.
///
/// Area is accumulated per distinct recall level using the best precision
/// reached at that recall or beyond.
pub fn ap_brute_force(dets: &[Detection<f64>], gts: &[GroundTruth<f64>], iou_threshold: f64) -> f64 {
    let mut thresholds: Vec<f64> = dets.iter().map(|d| d.score).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for &t in &thresholds {
        let mut subset: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].score >= t).collect();
        subset.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
        let mut used = vec![false; gts.len()];
        let mut tp = 0usize;
        for &d in &subset {
            let mut best = -1.0;
            let mut best_g = None;
            for (gi, g) in gts.iter().enumerate() {
                if used[gi] || g.label != dets[d].label || g.image_id != dets[d].image_id {
                    continue;
                }
                let v = dets[d].bbox.iou(&g.bbox);
                if v > best {
                    best = v;
                    best_g = Some(gi);
                }
            }
            if let Some(gi) = best_g {
                if best > iou_threshold {
                    used[gi] = true;
                    tp += 1;
                }
            }
        }
        pts.push((tp as f64 / gts.len() as f64, tp as f64 / subset.len() as f64));
    }
    let mut levels: Vec<f64> = pts.iter().map(|p| p.0).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in levels {
        let best_p = pts.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max);
        ap += (r - prev) * best_p;
        prev = r;
    }
    ap
}

// ---------------------------------------------------------------------------
// Optimization

/// Exhaustive maximization over a regular grid with `points` nodes per axis (endpoints included).
pub fn grid_search(objective: impl Fn(&[f64]) -> f64, bounds: &[(f64, f64)], points: usize) -> (Vec<f64>, f64) {
    assert!(points >= 2);
    let dim = bounds.len();
    let mut idx = vec![0usize; dim];
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    loop {
        let v: Vec<f64> = idx
            .iter()
            .zip(bounds)
            .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect();
        let f = objective(&v);
        if f > best.1 {
            best = (v, f);
        }
        let mut d = 0;
        loop {
            if d == dim {
                return best;
            }
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Invariant suite

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

pub fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Grid2D<f64> {
    Grid2D::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0))
}

/// Random dilated-convolution instance: input up to 16x16, kernel 3x3 or 5x5, rate 1..=4.
pub fn random_conv_instance(rng: &mut ChaCha8Rng) -> (Grid2D<f64>, Grid2D<f64>, usize) {
    let side = if rng.random::<bool>() { 3 } else { 5 };
    let rate = rng.random_range(1..=4);
    let w = rng.random_range(1..=16);
    let h = rng.random_range(1..=16);
    (random_grid(rng, w, h), random_grid(rng, side, side), rate)
}

/// Max deviation between the dilated kernel and the zero-inserted oracle, over both paddings.
pub fn conv_oracle_deviation(f: &Grid2D<f64>, k: &Grid2D<f64>, rate: usize) -> f64 {
    let z = zero_inserted_kernel(k, rate);
    let same = dilated_conv2d(f, k, rate, Padding::Same).expect("odd kernel");
    let mut dev = same
        .max_abs_diff(&standard_conv2d(f, &z, true))
        .unwrap_or(f64::INFINITY);
    if z.width() <= f.width() && z.height() <= f.height() {
        let valid = dilated_conv2d(f, k, rate, Padding::Valid).expect("kernel fits");
        dev = dev.max(
            valid
                .max_abs_diff(&standard_conv2d(f, &z, false))
                .unwrap_or(f64::INFINITY),
        );
    }
    dev
}

/// Runs every kernel invariant with `trials` random instances each.
pub fn run_kernel_checks(seed: u64, trials: usize) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (f, k, rate) = random_conv_instance(&mut rng);
        worst = worst.max(conv_oracle_deviation(&f, &k, rate));
    }
    out.push(outcome(
        "dilated_conv_matches_zero_inserted_kernel",
        worst <= CONV_TOL,
        format!("max dev {worst:e}"),
    ));

    let mut worst = 0.0f64;
    for _ in 0..trials {
        let (f1, k, rate) = random_conv_instance(&mut rng);
        let f2 = random_grid(&mut rng, f1.width(), f1.height());
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let mix = Grid2D::from_fn(f1.width(), f1.height(), |x, y| a * f1.get(x, y) + b * f2.get(x, y));
        let lhs = dilated_conv2d(&mix, &k, rate, Padding::Same).unwrap();
        let c1 = dilated_conv2d(&f1, &k, rate, Padding::Same).unwrap();
        let c2 = dilated_conv2d(&f2, &k, rate, Padding::Same).unwrap();
        let rhs = Grid2D::from_fn(f1.width(), f1.height(), |x, y| a * c1.get(x, y) + b * c2.get(x, y));
        worst = worst.max(lhs.max_abs_diff(&rhs).unwrap());
    }
    out.push(outcome(
        "dilated_conv_is_linear",
        worst <= CONV_TOL,
        format!("max dev {worst:e}"),
    ));

    let delta = Grid2D::impulse(3, 3, 1, 1);
    let mut ok = true;
    for _ in 0..trials.min(100) {
        let (f, _, rate) = random_conv_instance(&mut rng);
        ok &= dilated_conv2d(&f, &delta, rate, Padding::Same).unwrap() == f;
    }
    out.push(outcome("delta_kernel_is_identity", ok, String::new()));

    let rf: Vec<usize> = (1..=8).map(|l| receptive_field(3, l).unwrap()).collect();
    let monotone = rf.windows(2).all(|w| w[1] > w[0]);
    let extent = (1..=8).all(|l| {
        let z = zero_inserted_kernel(&Grid2D::from_fn(3, 3, |_, _| 1.0), l);
        z.width() == rf[l - 1] && z.get(z.width() - 1, 0) != 0.0
    });
    out.push(outcome(
        "receptive_field_monotone_and_matches_extent",
        monotone && extent && receptive_field(3, 2).unwrap() == 5,
        format!("rf(3, 1..=8) = {rf:?}"),
    ));

    let mut ok = true;
    let mut detail = String::new();
    for _ in 0..trials.min(200) {
        let w = rng.random_range(5..=16);
        let h = rng.random_range(5..=16);
        let rate = rng.random_range(1..=4);
        let g = random_grid(&mut rng, w, h);
        let shift = rng.random_range(-10.0..10.0);
        let idx = gridding_index(&g, rate).unwrap();
        let shifted = gridding_index(&g.map(|v| v + shift), rate).unwrap();
        let constant = gridding_index(&Grid2D::from_fn(w, h, |_, _| shift), rate).unwrap();
        if !(0.0..=1.0 + 1e-9).contains(&idx) || (idx - shifted).abs() > 1e-9 || constant != 0.0 {
            ok = false;
            detail = format!("index {idx}, shifted {shifted}, constant {constant}");
        }
    }
    let checker = Grid2D::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 1.0 } else { 0.0 });
    let cb: f64 = gridding_index(&checker, 2).unwrap();
    ok &= (cb - 1.0).abs() < 1e-9;
    out.push(outcome("gridding_index_range_and_shift_invariance", ok, detail));

    let (gridded, degridded) = degridding_pair();
    out.push(outcome(
        "degridding_cascade_lowers_gridding_index",
        gridded > degridded,
        format!("rates [2,2]: {gridded:.6}, rates [2,1]: {degridded:.6}"),
    ));

    let mut worst_grad = 0.0f64;
    let mut worst_fwd = 0.0f64;
    let mut alpha_ok = true;
    for _ in 0..trials.min(200) {
        let (x, g, p) = random_gate_instance(&mut rng, 8);
        let fwd = attention_gate_forward(&x, &g, &p).unwrap();
        alpha_ok &= fwd.alpha > 0.0 && fwd.alpha < 1.0;
        alpha_ok &= fwd.gated.iter().zip(&x).all(|(a, b)| *a == fwd.alpha * b);
        worst_fwd = worst_fwd.max((fwd.alpha - attention_alpha_scalar(&x, &g, &p)).abs());
        let analytic = attention_gate_grad(&x, &g, &p, 1.0).unwrap();
        let numeric = attention_fd_grads(&x, &g, &p, FD_STEP);
        worst_grad = worst_grad.max(max_grad_rel_err(&analytic, &numeric));
    }
    out.push(outcome(
        "attention_gate_forward_matches_scalar_loop",
        alpha_ok && worst_fwd <= 1e-12,
        format!("max dev {worst_fwd:e}"),
    ));
    out.push(outcome(
        "attention_gate_gradients_match_finite_differences",
        worst_grad < GRAD_REL_TOL,
        format!("max rel err {worst_grad:e}"),
    ));

    let mut ok = true;
    for _ in 0..trials {
        let p = rng.random_range(1e-6..1.0 - 1e-6);
        let y = rng.random::<bool>();
        let a = rng.random_range(0.0..=1.0);
        let gamma = rng.random_range(0.0..5.0);
        let (pt, at) = if y { (p, a) } else { (1.0 - p, 1.0 - a) };
        let fl = focal_loss(p, y, a, gamma).unwrap();
        ok &= fl >= 0.0 && fl <= -at * f64::ln(pt) + 1e-15;
    }
    out.push(outcome(
        "focal_loss_bounded_by_weighted_cross_entropy",
        ok,
        String::new(),
    ));

    let mut ok = true;
    for _ in 0..trials.min(100) {
        let beta = rng.random_range(0.05..3.0);
        let h = 1e-7 * beta;
        let f = |d: f64| smooth_l1(&[d], &[0.0], beta).unwrap();
        ok &= (f(beta * (1.0 - 1e-12)) - f(beta * (1.0 + 1e-12))).abs() < 1e-9;
        let left = (f(beta) - f(beta - h)) / h;
        let right = (f(beta + h) - f(beta)) / h;
        ok &= (left - 1.0).abs() < 1e-5 && (right - 1.0).abs() < 1e-5;
    }
    out.push(outcome("smooth_l1_continuous_slope_at_beta", ok, String::new()));

    out
}

/// Gridding index (rate 2) of an impulse pushed through 3x3 all-ones cascades with rates
/// `[2, 2]` and `[2, 1]`.
pub fn degridding_pair() -> (f64, f64) {
    let impulse = Grid2D::impulse(17, 17, 8, 8);
    let ones = Grid2D::from_fn(3, 3, |_, _| 1.0);
    let idx = |rates: &[usize]| {
        let g = crate::kernels::dilated_cascade(&impulse, &ones, rates).unwrap();
        gridding_index(&g, 2).unwrap()
    };
    (idx(&[2, 2]), idx(&[2, 1]))
}
