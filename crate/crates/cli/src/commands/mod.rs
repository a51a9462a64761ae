pub mod anchors;
pub mod augment;
pub mod eval;
pub mod split;
pub mod survey;
pub mod synth;

use crate::error::{CliError, Result};
use crate::fsutil::{list_files, read_text};
use orchard_core::ingest::{parse_voc_document, VocDocument};
use std::path::{Path, PathBuf};

/// Every `*.xml` annotation in `dir`, in file-name order.
pub(crate) fn load_annotations(dir: &Path) -> Result<Vec<(PathBuf, VocDocument)>> {
    list_files(dir, "xml")?
        .into_iter()
        .map(|path| {
            let doc = parse_voc_document(&read_text(&path)?).map_err(|e| CliError::parse(&path, e))?;
            Ok((path, doc))
        })
        .collect()
}
