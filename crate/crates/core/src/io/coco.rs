use serde::{Deserialize, Serialize};

use super::corpus::{Category, Corpus, ImageInfo, LoadOptions};
use super::parse_err;
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::geometry::BBox;

#[derive(Debug, Serialize, Deserialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<Category>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: u64,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file_name: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    #[serde(default)]
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default, skip_deserializing)]
    area: f64,
    #[serde(default)]
    iscrowd: u8,
}

pub fn corpus_from_coco_str(text: &str, opts: LoadOptions) -> Result<Corpus> {
    let file: CocoFile = serde_json::from_str(text).map_err(|e| parse_err("", e.to_string()))?;
    let images = file
        .images
        .iter()
        .map(|i| ImageInfo {
            id: i.id,
            width: i.width,
            height: i.height,
        })
        .collect();
    let mut gts = Vec::with_capacity(file.annotations.len());
    for (k, a) in file.annotations.iter().enumerate() {
        let [x, y, w, h] = a.bbox;
        let bbox =
            BBox::from_xywh(x, y, w, h).map_err(|e| parse_err("", format!("annotations[{k}] (id {}): {e}", a.id)))?;
        gts.push(GroundTruth {
            bbox,
            label: a.category_id,
            image_id: a.image_id,
        });
    }
    Corpus::new(images, gts, file.categories, opts).map_err(|e| match e {
        Error::InvalidArgument(m) => parse_err("", m),
        other => other,
    })
}

pub fn corpus_to_coco_string(corpus: &Corpus) -> Result<String> {
    let file = CocoFile {
        images: corpus
            .images()
            .iter()
            .map(|i| CocoImage {
                id: i.id,
                width: i.width,
                height: i.height,
                file_name: None,
            })
            .collect(),
        annotations: corpus
            .ground_truths()
            .iter()
            .enumerate()
            .map(|(k, g)| CocoAnnotation {
                id: k as u64 + 1,
                image_id: g.image_id,
                category_id: g.label,
                bbox: [g.bbox.x1(), g.bbox.y1(), g.bbox.width(), g.bbox.height()],
                area: g.bbox.area(),
                iscrowd: 0,
            })
            .collect(),
        categories: corpus.categories().to_vec(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::InvalidArgument(e.to_string()))
}
