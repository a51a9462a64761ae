//! Readers and writers for every file format the pipeline consumes.
//!
//! Parsers report the line (or annotation object) at fault and never skip a
//! malformed record. Writers emit floats with Rust's shortest round-trip
//! formatting, so parsing a written file reproduces the values bit for bit.

mod grid;
mod pix4d;
mod tables;
mod voc;

pub use grid::{parse_ascii_grid, write_ascii_grid};
pub use pix4d::{parse_offset, parse_pmatrix, write_offset, write_pmatrix, ImagePose, WorldOffset};
pub use tables::{parse_detections_csv, parse_rows_csv, write_detections_csv, write_rows_csv};
pub use voc::{
    parse_voc_annotations, parse_voc_document, write_voc_document, ClassLabel, GroundTruthBox,
    VocDocument,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("missing header field `{0}`")]
    HeaderMissing(&'static str),
    #[error("grid declares {expected} values but contains {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("object {object}: unknown class `{label}`")]
    UnknownClass { label: String, object: usize },
    #[error("object {object}: degenerate box ({xmin}, {ymin}, {xmax}, {ymax})")]
    DegenerateBox {
        object: usize,
        xmin: f64,
        ymin: f64,
        xmax: f64,
        ymax: f64,
    },
}

pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedLine {
        line,
        reason: reason.into(),
    }
}
