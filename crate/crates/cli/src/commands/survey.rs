//! `tag` and `crop`: project the orchard's trees into every surveyed image.

use crate::config::{require, PipelineConfig};
use crate::error::{CliError, Result};
use crate::fsutil::{ensure_dir, name_stem, read_text, write_atomic};
use crate::{CropArgs, SurveyArgs};
use image::{ImageFormat, ImageReader};
use orchard_core::crop::{survey, write_manifest_csv, write_missing, write_tags_csv, SurveyFrame, SurveyResult};
use orchard_core::geometry::CameraModel;
use orchard_core::ingest::{parse_ascii_grid, parse_offset, parse_pmatrix, parse_rows_csv};
use orchard_core::terrain::{build_tree_records, IdFormat, TreeRecord};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::path::Path;

fn apply(cfg: &mut PipelineConfig, a: &SurveyArgs) {
    let p = &mut cfg.paths;
    for (slot, flag) in [
        (&mut p.pmatrix, &a.pmatrix),
        (&mut p.offset, &a.offset),
        (&mut p.dtm, &a.dtm),
        (&mut p.dsm, &a.dsm),
        (&mut p.rows, &a.rows),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(w) = a.image_width {
        cfg.camera.image_width = w;
    }
    if let Some(h) = a.image_height {
        cfg.camera.image_height = h;
    }
    if a.focal.is_some() {
        cfg.camera.focal_length = a.focal;
    }
}

fn parse_file<T, E: std::fmt::Display>(path: &Path, parse: impl FnOnce(&str) -> std::result::Result<T, E>) -> Result<T> {
    parse(&read_text(path)?).map_err(|e| CliError::parse(path, e))
}

/// Trees in the local projection frame and one matrix camera per image.
pub fn load_survey(cfg: &PipelineConfig) -> Result<(Vec<TreeRecord>, Vec<SurveyFrame>)> {
    let p = &cfg.paths;
    let poses = parse_file(require(&p.pmatrix, "pmatrix")?, parse_pmatrix)?;
    let offset = parse_file(require(&p.offset, "offset")?, parse_offset)?;
    let dtm = parse_file(require(&p.dtm, "dtm")?, parse_ascii_grid)?;
    let dsm = parse_file(require(&p.dsm, "dsm")?, parse_ascii_grid)?;
    let rows = parse_file(require(&p.rows, "rows")?, parse_rows_csv)?;

    let id_format = IdFormat { min_width: cfg.crop.id_min_width };
    let trees = build_tree_records(&rows, &dtm, &dsm, id_format)
        .map_err(|e| CliError::invalid(e.to_string()))?
        .iter()
        .map(|t| t.shifted(offset.x, offset.y, offset.z))
        .collect();

    let mut seen = BTreeSet::new();
    let mut frames = Vec::with_capacity(poses.len());
    for pose in poses {
        if !seen.insert(pose.image_name.clone()) {
            return Err(CliError::invalid(format!("image {} listed twice in the pmatrix file", pose.image_name)));
        }
        frames.push(SurveyFrame {
            name: pose.image_name,
            camera: CameraModel::Matrix {
                pmatrix: pose.pmatrix,
                image_width: cfg.camera.image_width,
                image_height: cfg.camera.image_height,
                focal_length: cfg.camera.focal_length,
            },
        });
    }
    Ok((trees, frames))
}

fn run_survey(cfg: &PipelineConfig) -> Result<SurveyResult> {
    cfg.validate()?;
    let (trees, frames) = load_survey(cfg)?;
    log::info!("{} trees, {} images", trees.len(), frames.len());
    Ok(survey(&frames, &trees, cfg.crop.margin))
}

pub fn tag(mut cfg: PipelineConfig, a: &SurveyArgs) -> Result<()> {
    apply(&mut cfg, a);
    let result = run_survey(&cfg)?;
    let dir = cfg.output_dir().join("tags");
    ensure_dir(&dir)?;
    for (image, sightings) in &result.sightings {
        let path = dir.join(format!("{}.csv", name_stem(image)));
        write_atomic(&path, write_tags_csv(sightings).as_bytes())?;
    }
    let tagged: BTreeSet<&str> = result.sightings.iter().flat_map(|(_, s)| s.iter().map(|s| s.tree_id.as_str())).collect();
    println!("tagged {} trees across {} images", tagged.len(), result.sightings.len());
    Ok(())
}

pub fn crop(mut cfg: PipelineConfig, a: &CropArgs) -> Result<()> {
    apply(&mut cfg, &a.survey);
    if a.images.is_some() {
        cfg.paths.images.clone_from(&a.images);
    }
    if let Some(m) = a.margin {
        cfg.crop.margin = m;
    }
    let images = require(&cfg.paths.images, "images")?.to_path_buf();
    let result = run_survey(&cfg)?;
    let manifest = &result.manifest;
    let dir = cfg.output_dir().join("crops");
    ensure_dir(&dir)?;

    let mut by_image: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for c in &manifest.crops {
        by_image.entry(c.image_name.as_str()).or_default().push(c);
    }
    for (name, crops) in by_image {
        let path = images.join(name);
        let img = ImageReader::open(&path)
            .map_err(|e| CliError::io(&path, e))?
            .with_guessed_format()
            .map_err(|e| CliError::io(&path, e))?
            .decode()
            .map_err(|source| CliError::Image { path: path.clone(), source })?;
        if (img.width(), img.height()) != (cfg.camera.image_width, cfg.camera.image_height) {
            return Err(CliError::invalid(format!(
                "{} is {}x{}, expected {}x{}",
                path.display(),
                img.width(),
                img.height(),
                cfg.camera.image_width,
                cfg.camera.image_height
            )));
        }
        for c in crops {
            let piece = img.crop_imm(c.xmin, c.ymin, c.xmax - c.xmin, c.ymax - c.ymin);
            let mut bytes = Vec::new();
            piece
                .write_to(&mut Cursor::new(&mut bytes), ImageFormat::Png)
                .map_err(|source| CliError::Image { path: path.clone(), source })?;
            write_atomic(&dir.join(format!("{}.png", c.tree_id)), &bytes)?;
        }
    }

    write_atomic(&dir.join("manifest.csv"), write_manifest_csv(manifest).as_bytes())?;
    write_atomic(&dir.join("missing.txt"), write_missing(manifest).as_bytes())?;
    let mut skipped = String::from("tree_id,image\n");
    for (tree, image) in &manifest.skipped {
        skipped.push_str(&format!("{tree},{image}\n"));
    }
    write_atomic(&dir.join("skipped.csv"), skipped.as_bytes())?;
    println!(
        "{} crops, {} trees not visible, {} degenerate sightings",
        manifest.crops.len(),
        manifest.missing.len(),
        manifest.skipped.len()
    );
    Ok(())
}
