use super::{malformed, IngestError};
use crate::bbox::BBox;
use crate::eval::Detection;
use crate::ingest::ClassLabel;
use crate::terrain::RowSpec;
use serde::de::DeserializeOwned;
use serde::Deserialize;

const ROWS_HEADER: [&str; 6] = ["row", "start_x", "start_y", "end_x", "end_y", "spacing"];
const DETECTIONS_HEADER: [&str; 7] = ["image", "label", "conf", "xmin", "ymin", "xmax", "ymax"];

fn csv_line(err: &csv::Error) -> usize {
    err.position().map_or(0, |p| p.line() as usize)
}

/// Deserializes every record, pairing it with its 1-based line number.
fn records<T: DeserializeOwned>(text: &str, expected: &[&str]) -> Result<Vec<(usize, T)>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| malformed(csv_line(&e).max(1), e.to_string()))?
        .clone();
    if headers.iter().ne(expected.iter().copied()) {
        return Err(malformed(
            1,
            format!("expected header `{}`", expected.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let value = rec
            .deserialize(Some(&headers))
            .map_err(|e| malformed(line, e.to_string()))?;
        out.push((line, value));
    }
    Ok(out)
}

/// `row,start_x,start_y,end_x,end_y,spacing`
pub fn parse_rows_csv(text: &str) -> Result<Vec<RowSpec>, IngestError> {
    Ok(records::<RowSpec>(text, &ROWS_HEADER)?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

pub fn write_rows_csv(rows: &[RowSpec]) -> String {
    let mut out = ROWS_HEADER.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.row, r.start_x, r.start_y, r.end_x, r.end_y, r.spacing
        ));
    }
    out
}

#[derive(Deserialize)]
struct DetectionRow {
    image: String,
    label: String,
    conf: f64,
    xmin: f64,
    ymin: f64,
    xmax: f64,
    ymax: f64,
}

/// `image,label,conf,xmin,ymin,xmax,ymax`
pub fn parse_detections_csv(text: &str) -> Result<Vec<Detection>, IngestError> {
    let mut out = Vec::new();
    for (line, row) in records::<DetectionRow>(text, &DETECTIONS_HEADER)? {
        let label: ClassLabel = row
            .label
            .parse()
            .map_err(|l| malformed(line, format!("unknown class `{l}`")))?;
        if !(0.0..=1.0).contains(&row.conf) {
            return Err(malformed(line, format!("confidence {} outside [0, 1]", row.conf)));
        }
        let bbox = BBox::new(row.xmin, row.ymin, row.xmax, row.ymax);
        if !bbox.is_valid() {
            return Err(malformed(line, "degenerate box"));
        }
        out.push(Detection {
            image_name: row.image,
            label,
            bbox,
            confidence: row.conf,
        });
    }
    Ok(out)
}

pub fn write_detections_csv(dets: &[Detection]) -> String {
    let mut out = DETECTIONS_HEADER.join(",");
    out.push('\n');
    for d in dets {
        let b = d.bbox;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            d.image_name, d.label, d.confidence, b.xmin, b.ymin, b.xmax, b.ymax
        ));
    }
    out
}
