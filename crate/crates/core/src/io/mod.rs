//! Ground-truth corpora and prediction files: loading, saving, and synthetic generation.
//!
//! Two corpus formats are supported: COCO-style JSON (`bbox` as `[x, y, w, h]`)
//! and a flat CSV with header `image_id,width,height,x1,y1,x2,y2,label`. A CSV
//! row whose box and label fields are empty declares an image without
//! annotations. Predictions use CSV with header `image_id,x1,y1,x2,y2,score,label`.

mod coco;
mod corpus;
mod predictions;
mod synth;

use std::path::{Path, PathBuf};

pub use coco::{corpus_from_coco_str, corpus_to_coco_string};
pub use corpus::{read_corpus_csv, write_corpus_csv, Category, Corpus, CorpusFormat, ImageInfo, LoadOptions};
pub use predictions::{read_predictions, write_predictions, PREDICTIONS_HEADER};
pub use synth::{synthesize, BoxTruth, SyntheticCorpus, SyntheticMetadata, SyntheticSpec, WeightedRatio};

use crate::error::{Error, Result};
use crate::postprocess::Detection;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat, opts: LoadOptions) -> Result<Corpus> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parsed = match format {
        CorpusFormat::CocoJson => corpus_from_coco_str(&text, opts),
        CorpusFormat::Csv => read_corpus_csv(text.as_bytes(), opts),
    };
    parsed.map_err(|e| match e {
        Error::Parse { message, .. } => parse_err(path, message),
        other => parse_err(path, other.to_string()),
    })
}

/// Serializes `corpus` to bytes in the given format.
pub fn corpus_to_bytes(corpus: &Corpus, format: CorpusFormat) -> Result<Vec<u8>> {
    match format {
        CorpusFormat::CocoJson => Ok(corpus_to_coco_string(corpus)?.into_bytes()),
        CorpusFormat::Csv => {
            let mut buf = Vec::new();
            write_corpus_csv(corpus, &mut buf)?;
            Ok(buf)
        }
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let bytes = corpus_to_bytes(corpus, format)?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn load_predictions(path: &Path) -> Result<Vec<Detection<f64>>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    read_predictions(file).map_err(|e| match e {
        Error::Parse { message, .. } => parse_err(path, message),
        other => other,
    })
}

pub fn save_predictions(dets: &[Detection<f64>], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_predictions(dets, &mut buf)?;
    std::fs::write(path, buf).map_err(io_err(path))
}
