pub mod anchors;
pub mod evaluate;
pub mod kernel_check;
pub mod nms;
pub mod synthesize;

use std::path::Path;

use anyhow::{Context, Result};
use detkit::io::{load_corpus, Corpus, CorpusFormat, LoadOptions};
use detkit::postprocess::Detection;

use crate::run::Run;

pub fn read_corpus(run: &mut Run, path: &Path, clamp: bool) -> Result<Corpus> {
    run.input(path)?;
    let opts = LoadOptions {
        clamp_out_of_bounds: clamp,
    };
    Ok(load_corpus(path, CorpusFormat::from_path(path), opts)?)
}

pub fn read_predictions(run: &mut Run, path: &Path) -> Result<Vec<Detection<f64>>> {
    run.input(path)?;
    Ok(detkit::io::load_predictions(path)?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(run: &mut Run, path: &Path) -> Result<T> {
    run.input(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: invalid JSON", path.display()))
}
