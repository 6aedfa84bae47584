use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::corpus::csv_message;
use super::parse_err;
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::postprocess::Detection;

pub const PREDICTIONS_HEADER: &str = "image_id,x1,y1,x2,y2,score,label";

#[derive(Debug, Serialize, Deserialize)]
struct PredRow {
    image_id: u64,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    score: f64,
    label: u64,
}

pub fn read_predictions<R: Read>(reader: R) -> Result<Vec<Detection<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<PredRow>() {
        let row = rec.map_err(|e| parse_err("", csv_message(&e)))?;
        // header is line 1, so record k (0-based) sits on line k + 2
        let line = out.len() + 2;
        let bbox = BBox::new(row.x1, row.y1, row.x2, row.y2).map_err(|e| parse_err("", format!("row {line}: {e}")))?;
        let det = Detection::new(bbox, row.score, row.label, row.image_id)
            .map_err(|e| parse_err("", format!("row {line}: {e}")))?;
        out.push(det);
    }
    Ok(out)
}

pub fn write_predictions<W: Write>(dets: &[Detection<f64>], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(PREDICTIONS_HEADER.split(','))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for d in dets {
        wtr.serialize(PredRow {
            image_id: d.image_id,
            x1: d.bbox.x1(),
            y1: d.bbox.y1(),
            x2: d.bbox.x2(),
            y2: d.bbox.y2(),
            score: d.score,
            label: d.label,
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::InvalidArgument(e.to_string()))
}
