use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use detkit::io::write_predictions;
use detkit::postprocess::{hard_nms, soft_nms, DecayMethod, SoftNmsParams};
use serde_json::json;

use super::read_predictions;
use crate::run::Run;

#[derive(Debug, Args)]
pub struct NmsArgs {
    /// Predictions CSV (`image_id,x1,y1,x2,y2,score,label`).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Gaussian)]
    method: Method,
    /// Overlap threshold; defaults to 0.5 for hard NMS and 0.3 for linear decay.
    #[arg(long)]
    iou: Option<f64>,
    /// Gaussian decay width.
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Soft-NMS drops detections whose score falls below this.
    #[arg(long, default_value_t = 0.001)]
    score_floor: f64,
    #[arg(long, default_value = "nms-predictions.csv")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Hard,
    Linear,
    Gaussian,
}

pub fn run(args: NmsArgs, mut run: Run) -> Result<()> {
    let dets = read_predictions(&mut run, &args.pred)?;
    let iou = args.iou.unwrap_or(if args.method == Method::Hard { 0.5 } else { 0.3 });
    if !(0.0..=1.0).contains(&iou) {
        anyhow::bail!("--iou must lie in [0, 1], got {iou}");
    }
    let kept = match args.method {
        Method::Hard => hard_nms(&dets, iou),
        Method::Linear | Method::Gaussian => {
            let method = if args.method == Method::Linear {
                DecayMethod::Linear
            } else {
                DecayMethod::Gaussian
            };
            let params = SoftNmsParams {
                method,
                iou_threshold: iou,
                sigma: args.sigma,
                score_floor: args.score_floor,
            };
            soft_nms(&dets, &params)?
        }
    };
    let mut buf = Vec::new();
    write_predictions(&kept, &mut buf)?;
    run.write(&args.out, &buf)?;
    println!("input={} kept={}", dets.len(), kept.len());
    run.finish(json!({
        "pred": args.pred,
        "method": format!("{:?}", args.method).to_lowercase(),
        "iou": iou,
        "sigma": args.sigma,
        "score_floor": args.score_floor,
        "out": args.out,
    }))
}
