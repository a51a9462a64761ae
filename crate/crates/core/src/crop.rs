//! Per-image tree visibility, crop rectangles and first-seen deduplication.
//!
//! Every tree ends up in at most one crop. Images are visited in
//! lexicographic name order and a tree belongs to the first image in which it
//! is fully visible and yields a non-empty crop.

use crate::geometry::{project_world_point, CameraModel, PixelPoint};
use crate::terrain::TreeRecord;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use thiserror::Error;

/// Default raw drone frame, pixels.
pub const DEFAULT_IMAGE_WIDTH: u32 = 5472;
pub const DEFAULT_IMAGE_HEIGHT: u32 = 3648;
pub const DEFAULT_MARGIN: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CropError {
    #[error("crop for {tree_id} in {image_name} is empty after clamping")]
    DegenerateCrop { tree_id: String, image_name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSighting {
    pub tree_id: String,
    pub image_name: String,
    pub base_px: PixelPoint,
    pub top_px: PixelPoint,
    /// Camera-frame depth of the tree base, meters.
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CropRect {
    pub tree_id: String,
    pub image_name: String,
    pub xmin: u32,
    pub ymin: u32,
    pub xmax: u32,
    pub ymax: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CropManifest {
    /// Sorted by tree id.
    pub crops: Vec<CropRect>,
    /// Trees with no usable sighting, sorted.
    pub missing: Vec<String>,
    /// `(tree_id, image_name)` pairs whose crop was degenerate and skipped.
    pub skipped: Vec<(String, String)>,
}

fn inside(p: PixelPoint, width: u32, height: u32) -> bool {
    p.u >= 0.0 && p.u < width as f64 && p.v >= 0.0 && p.v < height as f64
}

/// Trees whose base and top both project in front of the camera and inside the frame.
pub fn visible_trees(image_name: &str, camera: &CameraModel, trees: &[TreeRecord]) -> Vec<TreeSighting> {
    let (w, h) = camera.image_size();
    trees
        .iter()
        .filter_map(|t| {
            let base_px = project_world_point(t.base, camera).ok()?;
            let top_px = project_world_point(t.top, camera).ok()?;
            (inside(base_px, w, h) && inside(top_px, w, h)).then(|| TreeSighting {
                tree_id: t.tree_id.clone(),
                image_name: image_name.to_string(),
                base_px,
                top_px,
                depth: camera.depth(t.base),
            })
        })
        .collect()
}

/// Crop rectangle for one sighting.
///
/// Vertically the crop spans the projected top and base; horizontally it is the
/// row spacing projected at the tree's depth (`spacing · focal / depth`),
/// centered on the trunk. `margin` widens each side by that fraction of the
/// half-width and of the vertical span. Mins are floored and maxes ceiled after
/// clamping to the image.
pub fn plan_crop(
    s: &TreeSighting,
    spacing: f64,
    focal: f64,
    margin: f64,
    image_size: (u32, u32),
) -> Result<CropRect, CropError> {
    let degenerate = || CropError::DegenerateCrop {
        tree_id: s.tree_id.clone(),
        image_name: s.image_name.clone(),
    };
    let (width, height) = (image_size.0 as f64, image_size.1 as f64);

    let half_w = 0.5 * spacing * focal / s.depth;
    let center_u = 0.5 * (s.base_px.u + s.top_px.u);
    let pad_x = margin * half_w;
    let v_lo = s.top_px.v.min(s.base_px.v);
    let v_hi = s.top_px.v.max(s.base_px.v);
    let span = v_hi - v_lo;
    let pad_y = margin * span;
    if !(half_w > 0.0) || !(span > 0.0) {
        return Err(degenerate());
    }

    let x0 = (center_u - half_w - pad_x).clamp(0.0, width);
    let x1 = (center_u + half_w + pad_x).clamp(0.0, width);
    let y0 = (v_lo - pad_y).clamp(0.0, height);
    let y1 = (v_hi + pad_y).clamp(0.0, height);
    if !(x0 < x1 && y0 < y1) {
        return Err(degenerate());
    }
    Ok(CropRect {
        tree_id: s.tree_id.clone(),
        image_name: s.image_name.clone(),
        xmin: x0.floor() as u32,
        ymin: y0.floor() as u32,
        xmax: x1.ceil() as u32,
        ymax: y1.ceil() as u32,
    })
}

/// Per-image facts the crop planner needs.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInfo {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub focal: f64,
}

impl FrameInfo {
    pub fn from_camera(name: impl Into<String>, camera: &CameraModel) -> Self {
        let (width, height) = camera.image_size();
        Self {
            name: name.into(),
            width,
            height,
            focal: camera.focal_length(),
        }
    }
}

/// Assigns each tree to the first image, in name order, that sees it.
///
/// Sightings for images absent from `frames` are ignored. A degenerate crop does
/// not record the tree, so a later image may still claim it.
pub fn dedup_assign(
    frames: &[FrameInfo],
    sightings: &[TreeSighting],
    trees: &[TreeRecord],
    margin: f64,
) -> CropManifest {
    let mut ordered: Vec<&FrameInfo> = frames.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    let spacing: BTreeMap<&str, f64> = trees.iter().map(|t| (t.tree_id.as_str(), t.spacing)).collect();

    let mut by_image: BTreeMap<&str, Vec<&TreeSighting>> = BTreeMap::new();
    for s in sightings {
        by_image.entry(s.image_name.as_str()).or_default().push(s);
    }

    let mut recorded = BTreeSet::new();
    let mut manifest = CropManifest::default();
    for frame in ordered {
        let Some(list) = by_image.get(frame.name.as_str()) else {
            continue;
        };
        for s in list {
            if recorded.contains(s.tree_id.as_str()) {
                continue;
            }
            let Some(&sp) = spacing.get(s.tree_id.as_str()) else {
                continue;
            };
            match plan_crop(s, sp, frame.focal, margin, (frame.width, frame.height)) {
                Ok(rect) => {
                    recorded.insert(s.tree_id.as_str());
                    manifest.crops.push(rect);
                }
                Err(e) => {
                    log::warn!("{e}");
                    manifest.skipped.push((s.tree_id.clone(), s.image_name.clone()));
                }
            }
        }
    }
    manifest.crops.sort();
    manifest.skipped.sort();
    manifest.missing = trees
        .iter()
        .map(|t| t.tree_id.as_str())
        .filter(|id| !recorded.contains(id))
        .map(str::to_string)
        .collect();
    manifest.missing.sort();
    manifest.missing.dedup();
    manifest
}

/// An image to survey together with its camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyFrame {
    pub name: String,
    pub camera: CameraModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyResult {
    /// Sightings per image, images in name order.
    pub sightings: Vec<(String, Vec<TreeSighting>)>,
    pub manifest: CropManifest,
}

/// Visibility for every frame followed by deduplicated crop planning.
pub fn survey(frames: &[SurveyFrame], trees: &[TreeRecord], margin: f64) -> SurveyResult {
    let mut ordered: Vec<&SurveyFrame> = frames.iter().collect();
    ordered.sort_by(|a, b| a.name.cmp(&b.name));
    let sightings: Vec<(String, Vec<TreeSighting>)> = ordered
        .iter()
        .map(|f| (f.name.clone(), visible_trees(&f.name, &f.camera, trees)))
        .collect();
    let infos: Vec<FrameInfo> = ordered
        .iter()
        .map(|f| FrameInfo::from_camera(f.name.clone(), &f.camera))
        .collect();
    let flat: Vec<TreeSighting> = sightings.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let manifest = dedup_assign(&infos, &flat, trees, margin);
    SurveyResult { sightings, manifest }
}

/// `tree_id,image,xmin,ymin,xmax,ymax`
pub fn write_manifest_csv(manifest: &CropManifest) -> String {
    let mut out = String::from("tree_id,image,xmin,ymin,xmax,ymax\n");
    for c in &manifest.crops {
        writeln!(out, "{},{},{},{},{},{}", c.tree_id, c.image_name, c.xmin, c.ymin, c.xmax, c.ymax).unwrap();
    }
    out
}

/// One tree id per line.
pub fn write_missing(manifest: &CropManifest) -> String {
    manifest.missing.iter().map(|id| format!("{id}\n")).collect()
}

/// `tree_id,u,v` of each visible tree base.
pub fn write_tags_csv(sightings: &[TreeSighting]) -> String {
    let mut out = String::from("tree_id,u,v\n");
    for s in sightings {
        writeln!(out, "{},{},{}", s.tree_id, s.base_px.u, s.base_px.v).unwrap();
    }
    out
}
