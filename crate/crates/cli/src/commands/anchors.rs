use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use detkit::anchors::{best_ious, AnchorConfig, CoverageMode, CoverageReport};
use detkit::io::Corpus;
use detkit::optimizer::{optimize_anchors_with, AnchorSearch, DeParams, RatioMode};
use serde_json::json;

use super::{read_corpus, read_json};
use crate::run::{sibling, Run};

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Ground-truth corpus (COCO JSON, or CSV by extension).
    #[arg(long)]
    gt: PathBuf,
    /// Starting anchor config: a JSON file or a preset name.
    #[arg(long, default_value = "retinanet-default")]
    config: String,
    /// Differential-evolution parameters (JSON); defaults derive from the config.
    #[arg(long)]
    de: Option<PathBuf>,
    #[arg(long, default_value = "optimized-anchors.json")]
    out: PathBuf,
    /// Objective trace CSV; defaults to `<out stem>.trace.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Symmetric)]
    ratio_mode: ModeArg,
    /// Clamp out-of-image boxes instead of rejecting them.
    #[arg(long)]
    clamp: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Symmetric,
    Free,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    /// Anchor config: a JSON file or a preset name.
    #[arg(long)]
    config: String,
    #[arg(long)]
    gt: PathBuf,
    /// `center` pairs every box with co-centered anchors; `grid` uses the real anchor lattice.
    #[arg(long, value_enum, default_value_t = CoverageArg::Center)]
    mode: CoverageArg,
    #[arg(long, default_value = "coverage-report.json")]
    out: PathBuf,
    #[arg(long)]
    clamp: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CoverageArg {
    Center,
    Grid,
}

fn load_config(run: &mut Run, spec: &str) -> Result<AnchorConfig<f64>> {
    let path = Path::new(spec);
    if path.exists() {
        let cfg: AnchorConfig<f64> = read_json(run, path)?;
        cfg.validate()
            .with_context(|| format!("{}: invalid anchor config", path.display()))?;
        return Ok(cfg);
    }
    match AnchorConfig::preset(spec) {
        Some(cfg) => Ok(cfg),
        None => {
            bail!("anchor config {spec:?} is neither a readable file nor a preset (retinanet-default, paper-optimized)")
        }
    }
}

fn grid_coverage(cfg: &AnchorConfig<f64>, corpus: &Corpus) -> Result<CoverageReport<f64>> {
    let mut by_image: BTreeMap<u64, Vec<_>> = BTreeMap::new();
    for g in corpus.ground_truths() {
        by_image.entry(g.image_id).or_default().push(*g);
    }
    let mut best = Vec::new();
    for (id, gts) in by_image {
        let im = corpus.image(id).expect("corpus validated image ids");
        let mode = CoverageMode::FullGrid {
            image_w: im.width as f64,
            image_h: im.height as f64,
        };
        best.extend(best_ious(cfg, &gts, mode)?);
    }
    Ok(CoverageReport::from_best_ious(&best)?)
}

pub fn optimize(args: OptimizeArgs, mut run: Run) -> Result<()> {
    let corpus = read_corpus(&mut run, &args.gt, args.clamp)?;
    let base = load_config(&mut run, &args.config)?;
    let mode = match args.ratio_mode {
        ModeArg::Symmetric => RatioMode::Symmetric,
        ModeArg::Free => RatioMode::Free,
    };
    let search = AnchorSearch::new(base.clone(), mode)?;
    let mut params: DeParams<f64> = match &args.de {
        Some(p) => read_json(&mut run, p)?,
        None => search.de_params(),
    };
    if let Some(seed) = run.seed() {
        params.seed = seed;
    }
    run.set_seed(params.seed);
    let gt = corpus.ground_truths();
    let before = detkit::coverage(&base, gt)?;
    let (cfg, result) = optimize_anchors_with(gt, &search, &params)?;

    let trace_name = args.trace.clone().unwrap_or_else(|| sibling(&args.out, "trace.csv"));
    let mut trace = String::from("generation,best_objective\n");
    for (g, v) in result.history.iter().enumerate() {
        trace.push_str(&format!("{g},{v}\n"));
    }
    run.write_json(&args.out, &cfg)?;
    run.write(&trace_name, trace.as_bytes())?;

    println!("base mean_best_iou={:?}", before.mean_best_iou);
    println!("optimized mean_best_iou={:?}", result.best_objective);
    println!("generations={} evaluations={}", result.generations, result.evaluations);
    let sizes: Vec<f64> = cfg.levels.iter().map(|l| l.base_size).collect();
    println!("sizes={sizes:?}");
    println!("ratios={:?}", cfg.ratios);
    run.finish(json!({
        "gt": args.gt,
        "config": args.config,
        "ratio_mode": format!("{:?}", args.ratio_mode).to_lowercase(),
        "clamp": args.clamp,
        "de": params,
        "out": args.out,
        "trace": trace_name,
    }))
}

pub fn coverage_report(args: CoverageArgs, mut run: Run) -> Result<()> {
    let corpus = read_corpus(&mut run, &args.gt, args.clamp)?;
    let cfg = load_config(&mut run, &args.config)?;
    let report = match args.mode {
        CoverageArg::Center => detkit::coverage(&cfg, corpus.ground_truths())?,
        CoverageArg::Grid => grid_coverage(&cfg, &corpus)?,
    };
    let mode = format!("{:?}", args.mode).to_lowercase();
    println!(
        "config={} mode={mode} anchors_per_location={}",
        args.config,
        cfg.anchors_per_location()
    );
    println!(
        "boxes={} mean_best_iou={:?} min_best_iou={:?} frac_iou_ge_0.5={:?}",
        report.boxes, report.mean_best_iou, report.min_best_iou, report.frac_at_least_half
    );
    run.write_json(
        &args.out,
        &json!({
            "config": args.config,
            "mode": mode,
            "anchors_per_location": cfg.anchors_per_location(),
            "report": report,
        }),
    )?;
    run.finish(json!({ "gt": args.gt, "config": args.config, "mode": mode, "clamp": args.clamp, "out": args.out }))
}
