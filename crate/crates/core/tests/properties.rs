use std::sync::atomic::{AtomicBool, Ordering};

use detkit::kernels::{dilated_conv2d, focal_loss, gridding_index, Grid2D, Padding};
use detkit::optimizer::{AnchorSearch, RatioMode};
use detkit::*;
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BBox64> {
    (0.0..200.0f64, 0.0..200.0f64, 0.5..80.0f64, 0.5..80.0f64)
        .prop_map(|(x, y, w, h)| BBox::from_xywh(x, y, w, h).unwrap())
}

fn det(image_id: u64) -> impl Strategy<Value = Detection64> {
    (bbox(), 0.0..=1.0f64, 0..2u64).prop_map(move |(b, s, l)| Detection::new(b, s, l, image_id).unwrap())
}

fn dets() -> impl Strategy<Value = Vec<Detection64>> {
    prop::collection::vec((0..3u64).prop_flat_map(det), 0..24)
}

fn gts() -> impl Strategy<Value = Vec<GroundTruth64>> {
    prop::collection::vec(
        (bbox(), 0..2u64, 0..3u64).prop_map(|(bbox, label, image_id)| GroundTruth { bbox, label, image_id }),
        1..12,
    )
}

fn grid(max: usize) -> impl Strategy<Value = Grid2D<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        prop::collection::vec(-1.0..1.0f64, w * h).prop_map(move |v| Grid2D::new(w, h, v).unwrap())
    })
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let u = iou(&a, &b);
        prop_assert_eq!(u, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&u));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iou_translation_invariant(a in bbox(), b in bbox(), dx in -50.0..50.0f64, dy in -50.0..50.0f64) {
        let ta = a.translate(dx, dy).unwrap();
        let tb = b.translate(dx, dy).unwrap();
        prop_assert!((iou(&a, &b) - iou(&ta, &tb)).abs() < 1e-9);
    }

    #[test]
    fn center_aligned_matches_cocentered_boxes(
        w1 in 0.1..100.0f64, h1 in 0.1..100.0f64, w2 in 0.1..100.0f64, h2 in 0.1..100.0f64,
        cx in 0.0..500.0f64, cy in 0.0..500.0f64,
    ) {
        let a = BBox::from_center(cx, cy, w1, h1).unwrap();
        let b = BBox::from_center(cx, cy, w2, h2).unwrap();
        prop_assert!((center_aligned_iou((w1, h1), (w2, h2)).unwrap() - iou(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn adding_a_ratio_never_lowers_coverage(gt in gts(), extra in 0.2..5.0f64) {
        let base = AnchorConfig::<f64>::retinanet_default();
        let mut ratios = base.ratios.clone();
        ratios.push(extra);
        let wider = AnchorConfig::new(base.levels.clone(), base.octave_scales.clone(), ratios).unwrap();
        let a = coverage(&base, &gt).unwrap();
        let b = coverage(&wider, &gt).unwrap();
        prop_assert!(b.mean_best_iou >= a.mean_best_iou);
        prop_assert!(b.min_best_iou >= a.min_best_iou);
        prop_assert!(a.mean_best_iou <= 1.0 && a.min_best_iou >= 0.0);
    }

    #[test]
    fn soft_nms_never_raises_scores(d in dets(), gaussian in any::<bool>(), nt in 0.0..1.0f64, floor in 0.0..0.2f64) {
        let mut p = SoftNmsParams::new(if gaussian { DecayMethod::Gaussian } else { DecayMethod::Linear });
        p.iou_threshold = nt;
        p.score_floor = floor;
        for o in soft_nms(&d, &p).unwrap() {
            prop_assert!(o.score >= floor);
            prop_assert!(d.iter().any(|i| i.bbox == o.bbox && i.label == o.label && i.image_id == o.image_id && i.score >= o.score));
        }
    }

    #[test]
    fn hard_nms_is_subset_sorted(d in dets(), nt in 0.0..1.0f64) {
        let kept = hard_nms(&d, nt);
        prop_assert!(kept.iter().all(|k| d.contains(k)));
        prop_assert!(kept.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn linear_soft_nms_keeps_non_overlapping_sets(d in dets(), nt in 0.0..1.0f64) {
        if hard_nms(&d, nt).len() == d.len() {
            let mut p = SoftNmsParams::new(DecayMethod::Linear);
            p.iou_threshold = nt;
            p.score_floor = 0.0;
            let soft = soft_nms(&d, &p).unwrap();
            prop_assert_eq!(soft.len(), d.len());
            prop_assert!(soft.iter().all(|o| d.contains(o)));
        }
    }

    #[test]
    fn gaussian_decay_is_continuous(a in bbox(), b in bbox(), eps in -1e-6..1e-6f64) {
        let first = Detection::new(a, 0.9, 0, 0).unwrap();
        let second = |bx: BBox64| Detection::new(bx, 0.8, 0, 0).unwrap();
        let mut p = SoftNmsParams::new(DecayMethod::Gaussian);
        p.score_floor = 0.0;
        let s0 = soft_nms(&[first, second(b)], &p).unwrap()[1].score;
        let s1 = soft_nms(&[first, second(b.translate(eps, eps).unwrap())], &p).unwrap()[1].score;
        prop_assert!((s0 - s1).abs() < 1e-4);
    }

    #[test]
    fn match_counts_balance(d in dets(), g in gts(), thr in 0.1..0.9f64) {
        let m = match_detections(&d, &g, thr);
        prop_assert_eq!(m.tp + m.fp, d.len());
        prop_assert_eq!(m.tp + m.fn_boxes, g.len());
        prop_assert_eq!(m.is_tp.iter().filter(|t| **t).count(), m.tp);
    }

    #[test]
    fn ap_invariant_to_monotone_rescaling(d in dets(), g in gts()) {
        let squared: Vec<_> = d.iter().map(|x| Detection { score: x.score * x.score, ..*x }).collect();
        let a = average_precision(&d, &g, 0.5).unwrap().ap;
        let b = average_precision(&squared, &g, 0.5).unwrap().ap;
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        let mut rev = d.clone();
        rev.reverse();
        // reversal can only reorder equal scores, which never changes the curve's envelope area
        prop_assert!((average_precision(&rev, &g, 0.5).unwrap().ap - a).abs() < 1e-12 || has_ties(&d));
    }

    #[test]
    fn lowest_fp_never_helps_lowest_tp_never_hurts(d in dets(), g in gts()) {
        let base = average_precision(&d, &g, 0.5).unwrap().ap;
        let low = d.iter().map(|x| x.score).fold(1.0, f64::min) * 0.5;
        let mut with_fp = d.clone();
        with_fp.push(Detection::new(BBox::new(5000.0, 5000.0, 5001.0, 5001.0).unwrap(), low, 0, 0).unwrap());
        prop_assert!(average_precision(&with_fp, &g, 0.5).unwrap().ap <= base + 1e-12);

        let m = match_detections(&d, &g, 0.5);
        let consumed: Vec<usize> = m.matched_gt.iter().flatten().copied().collect();
        if let Some(free) = (0..g.len()).find(|i| !consumed.contains(i)) {
            let mut with_tp = d.clone();
            with_tp.push(Detection::new(g[free].bbox, low, g[free].label, g[free].image_id).unwrap());
            prop_assert!(average_precision(&with_tp, &g, 0.5).unwrap().ap >= base - 1e-12);
        }
    }

    #[test]
    fn map_equals_ap_for_one_label(d in dets(), g in gts()) {
        let d: Vec<_> = d.into_iter().map(|x| Detection { label: 7, ..x }).collect();
        let g: Vec<_> = g.into_iter().map(|x| GroundTruth { label: 7, ..x }).collect();
        let ap = average_precision(&d, &g, 0.5).unwrap().ap;
        prop_assert_eq!(mean_average_precision(&d, &g, 0.5).unwrap().map, ap);
    }

    #[test]
    fn dilated_conv_is_linear(f1 in grid(12), k in grid(3), rate in 1..4usize, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let k = Grid2D::from_fn(3, 3, |x, y| k.get_or_zero(x as isize, y as isize));
        let f2 = f1.map(|v| (v * 7.3).sin());
        let mix = Grid2D::from_fn(f1.width(), f1.height(), |x, y| a * f1.get(x, y) + b * f2.get(x, y));
        let lhs = dilated_conv2d(&mix, &k, rate, Padding::Same).unwrap();
        let c1 = dilated_conv2d(&f1, &k, rate, Padding::Same).unwrap();
        let c2 = dilated_conv2d(&f2, &k, rate, Padding::Same).unwrap();
        let rhs = Grid2D::from_fn(f1.width(), f1.height(), |x, y| a * c1.get(x, y) + b * c2.get(x, y));
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn gridding_index_bounded_and_shift_invariant(g in grid(16), rate in 1..4usize, c in -100.0..100.0f64) {
        prop_assume!(g.width() > rate && g.height() > rate);
        let i = gridding_index(&g, rate).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&i));
        prop_assert!((i - gridding_index(&g.map(|v| v + c), rate).unwrap()).abs() < 1e-6);
        prop_assert_eq!(gridding_index(&g.map(|_| c), rate).unwrap(), 0.0);
    }

    #[test]
    fn focal_loss_below_weighted_ce(p in 1e-9..(1.0 - 1e-9f64), y in any::<bool>(), a in 0.0..=1.0f64, gamma in 0.0..5.0f64) {
        let (pt, at) = if y { (p, a) } else { (1.0 - p, 1.0 - a) };
        let fl = focal_loss(p, y, a, gamma).unwrap();
        prop_assert!(fl >= 0.0);
        prop_assert!(fl <= -at * pt.ln() * (1.0 + 1e-12));
    }

    #[test]
    fn de_history_monotone_and_in_bounds(seed in any::<u64>(), c in prop::collection::vec(-3.0..3.0f64, 3)) {
        let bounds = vec![(-2.0, 1.0), (0.0, 4.0), (-1.0, -0.5)];
        let bounds_ok = AtomicBool::new(true);
        let b2 = bounds.clone();
        let objective = |x: &[f64]| {
            if x.iter().zip(&b2).any(|(v, (lo, hi))| v < lo || v > hi) {
                bounds_ok.store(false, Ordering::Relaxed);
            }
            x.iter().zip(&c).map(|(v, w)| (v * w * 3.0).sin() + w * v).sum::<f64>()
        };
        let mut p = DeParams::new(bounds);
        p.seed = seed;
        p.max_generations = 40;
        let r = de_optimize(objective, &p).unwrap();
        prop_assert!(bounds_ok.load(Ordering::Relaxed));
        prop_assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(*r.history.last().unwrap(), r.best_objective);
    }

    #[test]
    fn symmetric_ratio_round_trip(r1 in 1.01..3.9f64, r2 in 1.01..3.9f64, sizes in prop::collection::vec(10.0..500.0f64, 5)) {
        let ratios = vec![1.0 / r2, 1.0 / r1, 1.0, r1, r2];
        let cfg = AnchorConfig::fpn(&sizes, anchors::default_octave_scales(), ratios).unwrap();
        let s = AnchorSearch::new(cfg.clone(), RatioMode::Symmetric).unwrap();
        let back = s.decode(&s.encode(&cfg).unwrap()).unwrap();
        let mut want = cfg.ratios.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in back.ratios.iter().zip(&want) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.levels.iter().zip(&cfg.levels) {
            prop_assert!((a.base_size - b.base_size).abs() < 1e-12 * b.base_size);
        }
    }
}

fn has_ties(d: &[Detection64]) -> bool {
    let mut s: Vec<f64> = d.iter().map(|x| x.score).collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.windows(2).any(|w| w[0] == w[1])
}
