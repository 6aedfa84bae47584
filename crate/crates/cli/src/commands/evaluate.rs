use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use detkit::eval::{average_precision, match_detections, mean_average_precision};
use serde_json::json;

use super::{read_corpus, read_predictions};
use crate::run::Run;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// A detection matches when its IoU with a ground truth is strictly greater than this.
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    #[arg(long, default_value = "metrics.json")]
    metrics: PathBuf,
    #[arg(long, default_value = "pr-curve.csv")]
    pr_curve: PathBuf,
    #[arg(long)]
    clamp: bool,
}

pub fn run(args: EvaluateArgs, mut run: Run) -> Result<()> {
    let corpus = read_corpus(&mut run, &args.gt, args.clamp)?;
    let dets = read_predictions(&mut run, &args.pred)?;
    let gts = corpus.ground_truths();
    let m = match_detections(&dets, gts, args.iou);
    let prf = m.prf::<f64>();
    let map = mean_average_precision(&dets, gts, args.iou)?;
    let pooled = average_precision(&dets, gts, args.iou)?;

    let text = format!(
        "prec={:?} rec={:?} f1={:?} ap={:?}\ntp={} fp={} fn={} fn_frames={}\n",
        prf.precision, prf.recall, prf.f1, map.map, m.tp, m.fp, m.fn_boxes, m.fn_frames
    );
    print!("{text}");

    let mut csv = String::from("threshold,recall,precision\n");
    for p in &pooled.points {
        csv.push_str(&format!("{},{},{}\n", p.threshold, p.recall, p.precision));
    }
    let per_label: Vec<_> = map
        .per_label
        .iter()
        .map(|(label, ap)| json!({ "label": label, "ap": ap }))
        .collect();
    run.write_json(
        &args.metrics,
        &json!({
            "iou_threshold": args.iou,
            "detections": dets.len(),
            "ground_truths": gts.len(),
            "tp": m.tp,
            "fp": m.fp,
            "fn": m.fn_boxes,
            "fn_frames": m.fn_frames,
            "precision": prf.precision,
            "recall": prf.recall,
            "f1": prf.f1,
            "map": map.map,
            "ap_per_label": per_label,
            "ap_pooled": pooled.ap,
        }),
    )?;
    run.write(&args.metrics.with_extension("txt"), text.as_bytes())?;
    run.write(&args.pr_curve, csv.as_bytes())?;
    run.finish(json!({
        "gt": args.gt,
        "pred": args.pred,
        "iou": args.iou,
        "clamp": args.clamp,
        "metrics": args.metrics,
        "pr_curve": args.pr_curve,
    }))
}
