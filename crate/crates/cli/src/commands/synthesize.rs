use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use detkit::io::{corpus_to_bytes, synthesize, CorpusFormat, SyntheticSpec};
use serde_json::json;

use super::read_json;
use crate::run::{sibling, Run};

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    /// Generation spec (JSON); defaults to the small-polyp profile.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Image count for the default profile.
    #[arg(long, default_value_t = 100)]
    images: usize,
    /// Corpus file; `.csv` writes CSV, anything else COCO JSON.
    #[arg(long, default_value = "synthetic.json")]
    out: PathBuf,
    /// Generation metadata; defaults to `<out stem>.meta.json`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

pub fn run(args: SynthesizeArgs, mut run: Run) -> Result<()> {
    let mut spec = match &args.spec {
        Some(p) => read_json::<SyntheticSpec>(&mut run, p)?,
        None => SyntheticSpec::small_polyp(args.images, 0),
    };
    if let Some(seed) = run.seed() {
        spec.seed = seed;
    }
    run.set_seed(spec.seed);
    let synth = synthesize(&spec)?;
    let bytes = corpus_to_bytes(&synth.corpus, CorpusFormat::from_path(&args.out))?;
    let meta = args.meta.clone().unwrap_or_else(|| sibling(&args.out, "meta.json"));
    run.write(&args.out, &bytes)?;
    run.write_json(&meta, &synth.metadata)?;
    println!(
        "images={} boxes={}",
        synth.corpus.images().len(),
        synth.corpus.ground_truths().len()
    );
    run.finish(json!({ "spec": spec, "out": args.out, "meta": meta }))
}
