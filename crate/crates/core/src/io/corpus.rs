use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse_err;
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    CocoJson,
    Csv,
}

impl CorpusFormat {
    /// `.csv` means CSV; anything else is read as COCO JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::CocoJson,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Clamp boxes that leave their image instead of rejecting them.
    pub clamp_out_of_bounds: bool,
}

/// Images, their annotated boxes, and the category table.
///
/// Kept in canonical order: images ascending by id, ground truths grouped by
/// image in that order (relative order within an image preserved), categories
/// ascending by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    images: Vec<ImageInfo>,
    ground_truths: Vec<GroundTruth<f64>>,
    categories: Vec<Category>,
}

impl Corpus {
    pub fn new(
        mut images: Vec<ImageInfo>,
        mut ground_truths: Vec<GroundTruth<f64>>,
        mut categories: Vec<Category>,
        opts: LoadOptions,
    ) -> Result<Self> {
        images.sort_by_key(|i| i.id);
        if let Some(w) = images.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidArgument(format!("duplicate image id {}", w[0].id)));
        }
        categories.sort_by_key(|c| c.id);
        let by_id: BTreeMap<u64, ImageInfo> = images.iter().map(|i| (i.id, *i)).collect();
        for (k, g) in ground_truths.iter_mut().enumerate() {
            let img = by_id.get(&g.image_id).ok_or_else(|| {
                Error::InvalidArgument(format!("ground truth {k} references unknown image {}", g.image_id))
            })?;
            let (w, h) = (img.width as f64, img.height as f64);
            if !g.bbox.within(w, h) {
                if opts.clamp_out_of_bounds {
                    g.bbox = g.bbox.clamp_to(w, h);
                } else {
                    return Err(Error::InvalidArgument(format!(
                        "ground truth {k}: box ({}, {}, {}, {}) outside image {} ({} x {})",
                        g.bbox.x1(),
                        g.bbox.y1(),
                        g.bbox.x2(),
                        g.bbox.y2(),
                        img.id,
                        img.width,
                        img.height
                    )));
                }
            }
        }
        ground_truths.sort_by_key(|g| g.image_id);
        Ok(Self {
            images,
            ground_truths,
            categories,
        })
    }

    pub fn images(&self) -> &[ImageInfo] {
        &self.images
    }

    pub fn ground_truths(&self) -> &[GroundTruth<f64>] {
        &self.ground_truths
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn image(&self, id: u64) -> Option<&ImageInfo> {
        self.images
            .binary_search_by_key(&id, |i| i.id)
            .ok()
            .map(|k| &self.images[k])
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    image_id: u64,
    width: u32,
    height: u32,
    x1: Option<f64>,
    y1: Option<f64>,
    x2: Option<f64>,
    y2: Option<f64>,
    label: Option<u64>,
}

pub fn read_corpus_csv<R: Read>(reader: R, opts: LoadOptions) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut images: BTreeMap<u64, ImageInfo> = BTreeMap::new();
    let mut gts = Vec::new();
    let mut labels = BTreeSet::new();
    for rec in rdr.deserialize::<CsvRow>() {
        let row = rec.map_err(|e| parse_err("", csv_message(&e)))?;
        let info = ImageInfo {
            id: row.image_id,
            width: row.width,
            height: row.height,
        };
        if let Some(prev) = images.insert(row.image_id, info) {
            if prev != info {
                return Err(parse_err(
                    "",
                    format!(
                        "image {} declared as {}x{} and {}x{}",
                        info.id, prev.width, prev.height, info.width, info.height
                    ),
                ));
            }
        }
        match (row.x1, row.y1, row.x2, row.y2, row.label) {
            (None, None, None, None, None) => {}
            (Some(x1), Some(y1), Some(x2), Some(y2), Some(label)) => {
                let bbox =
                    BBox::new(x1, y1, x2, y2).map_err(|e| parse_err("", format!("image {}: {e}", row.image_id)))?;
                labels.insert(label);
                gts.push(GroundTruth {
                    bbox,
                    label,
                    image_id: row.image_id,
                });
            }
            _ => {
                return Err(parse_err(
                    "",
                    format!("image {}: partially empty box row", row.image_id),
                ))
            }
        }
    }
    let categories = labels
        .into_iter()
        .map(|id| Category {
            id,
            name: id.to_string(),
        })
        .collect();
    Corpus::new(images.into_values().collect(), gts, categories, opts)
}

pub fn write_corpus_csv<W: Write>(corpus: &Corpus, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
    let mut gts = corpus.ground_truths.iter().peekable();
    let csv_err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    for img in &corpus.images {
        let mut any = false;
        while let Some(g) = gts.next_if(|g| g.image_id == img.id) {
            any = true;
            wtr.serialize(CsvRow {
                image_id: img.id,
                width: img.width,
                height: img.height,
                x1: Some(g.bbox.x1()),
                y1: Some(g.bbox.y1()),
                x2: Some(g.bbox.x2()),
                y2: Some(g.bbox.y2()),
                label: Some(g.label),
            })
            .map_err(csv_err)?;
        }
        if !any {
            wtr.serialize(CsvRow {
                image_id: img.id,
                width: img.width,
                height: img.height,
                x1: None,
                y1: None,
                x2: None,
                y2: None,
                label: None,
            })
            .map_err(csv_err)?;
        }
    }
    wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}

pub(super) fn csv_message(e: &csv::Error) -> String {
    match e.position() {
        Some(pos) => format!("line {}: {}", pos.line(), e),
        None => e.to_string(),
    }
}
