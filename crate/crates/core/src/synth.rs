//! Synthetic orchards with exact groundtruth, for testing the cropping pipeline.
//!
//! A scene is a rectangular block of tree rows on an analytic terrain, seen by
//! oblique cameras flown in parallel lines. Trees sit exactly on raster cell
//! centers so bilinear sampling returns the generating heights, and all
//! coordinates are multiples of the cell size so the global/local shift is exact.
//! The oracle projects every tree into every camera directly and deduplicates
//! with its own loop; the pipeline goes through the emitted files instead.

use crate::bbox::BBox;
use crate::crop::{plan_crop, CropManifest, FrameInfo, SurveyFrame, TreeSighting};
use crate::eval::Detection;
use crate::geometry::{
    build_rotation, camera_to_pixel, world_to_camera, CameraExtrinsics, CameraIntrinsics, CameraModel, EulerAngles,
    ProjectionMatrix, RotationMatrix, WorldPoint, MIN_DEPTH,
};
use crate::ingest::{
    write_ascii_grid, write_offset, write_pmatrix, write_rows_csv, ClassLabel, GroundTruthBox, ImagePose, VocDocument,
    WorldOffset,
};
use crate::terrain::{IdFormat, RowSpec, TerrainGrid, TreeRecord};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::io;
use std::path::Path;

pub const PMATRIX_FILE: &str = "synth_pmatrix.txt";
pub const OFFSET_FILE: &str = "synth_offset.xyz";
pub const DTM_FILE: &str = "dtm.asc";
pub const DSM_FILE: &str = "dsm.asc";
pub const ROWS_FILE: &str = "rows.csv";

/// Bare-earth elevation in local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerrainKind {
    Flat { z: f64 },
    Inclined { z0: f64, gx: f64, gy: f64 },
    Sinusoid { z0: f64, amplitude: f64, wavelength: f64 },
}

impl TerrainKind {
    pub fn elevation(&self, x: f64, y: f64) -> f64 {
        match *self {
            TerrainKind::Flat { z } => z,
            TerrainKind::Inclined { z0, gx, gy } => z0 + gx * x + gy * y,
            TerrainKind::Sinusoid { z0, amplitude, wavelength } => {
                z0 + amplitude * (TAU * x / wavelength).sin() * (TAU * y / wavelength).cos()
            }
        }
    }

    pub fn base_level(&self) -> f64 {
        match *self {
            TerrainKind::Flat { z } => z,
            TerrainKind::Inclined { z0, .. } | TerrainKind::Sinusoid { z0, .. } => z0,
        }
    }
}

/// One camera: projection center in local coordinates and orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub image_name: String,
    pub position: WorldPoint,
    pub angles: EulerAngles,
}

/// Camera orientation looking along `heading` (radians clockwise from +y, seen
/// from above), tilted `pitch` radians below the horizon, image top toward the sky.
pub fn look_rotation(heading: f64, pitch: f64) -> RotationMatrix {
    let d = Vector3::new(heading.sin() * pitch.cos(), heading.cos() * pitch.cos(), -pitch.sin());
    let z = Vector3::z();
    let up = (z - d * z.dot(&d)).normalize();
    let x = up.cross(&d);
    RotationMatrix::from_matrix_unchecked(Matrix3::from_columns(&[x, up, d]))
}

/// Parallel flight lines south of each band of rows, all cameras facing +y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    pub lines: usize,
    pub poses_per_line: usize,
    /// Height above the terrain base level, meters.
    pub altitude: f64,
    pub pitch_deg: f64,
    /// Side overlap between neighbouring frames on a line, in [0, 1).
    pub overlap: f64,
    /// Uniform position noise, meters, and heading noise, degrees.
    pub position_jitter: f64,
    pub heading_jitter_deg: f64,
}

impl Default for FlightPlan {
    fn default() -> Self {
        Self {
            lines: 4,
            poses_per_line: 5,
            altitude: 8.0,
            pitch_deg: 35.0,
            overlap: 0.6,
            position_jitter: 0.5,
            heading_jitter_deg: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub n_rows: u32,
    pub trees_per_row: u32,
    /// In-row spacing and gap between rows, meters; multiples of `cellsize`.
    pub spacing: f64,
    pub row_gap: f64,
    pub terrain: TerrainKind,
    pub tree_height: (f64, f64),
    pub cellsize: f64,
    /// Raster margin around the orchard, meters; a multiple of `cellsize`.
    pub pad: f64,
    pub offset: (f64, f64, f64),
    pub focal_length: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub flight: FlightPlan,
    pub seed: u64,
}

impl Default for SceneSpec {
    /// 10 x 10 trees seen from 20 cameras at full sensor resolution.
    fn default() -> Self {
        Self {
            n_rows: 10,
            trees_per_row: 10,
            spacing: 3.0,
            row_gap: 5.0,
            terrain: TerrainKind::Sinusoid { z0: 0.0, amplitude: 0.8, wavelength: 40.0 },
            tree_height: (2.5, 3.5),
            cellsize: 0.5,
            pad: 10.0,
            offset: (355_000.0, 6_470_000.0, 40.0),
            focal_length: 3650.0,
            image_width: 5472,
            image_height: 3648,
            flight: FlightPlan::default(),
            seed: 7,
        }
    }
}

impl SceneSpec {
    /// Same geometry at `1/factor` resolution, focal length scaled to keep the field of view.
    pub fn downscaled(mut self, factor: u32) -> Self {
        self.image_width /= factor;
        self.image_height /= factor;
        self.focal_length /= factor as f64;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        let multiple = |v: f64| (v / self.cellsize).fract() == 0.0;
        if self.n_rows == 0 || self.trees_per_row == 0 {
            return Err("scene needs at least one tree".into());
        }
        if !(self.cellsize > 0.0) || !(self.spacing > 0.0) || !(self.row_gap > 0.0) {
            return Err("cellsize, spacing and row gap must be positive".into());
        }
        if !multiple(self.spacing) || !multiple(self.row_gap) || !multiple(self.pad) {
            return Err("spacing, row gap and pad must be multiples of the cell size".into());
        }
        if !(0.0..1.0).contains(&self.flight.overlap) {
            return Err(format!("overlap {} outside [0, 1)", self.flight.overlap));
        }
        if !(self.tree_height.0 > 0.0 && self.tree_height.0 <= self.tree_height.1) {
            return Err("tree height range must be positive and ordered".into());
        }
        Ok(())
    }
}

/// Generated scene. Trees, rows and rasters are in global coordinates; poses and
/// projection matrices are in the local frame (`global = local + offset`).
#[derive(Debug, Clone)]
pub struct Scene {
    pub offset: WorldOffset,
    pub rows: Vec<RowSpec>,
    pub dtm: TerrainGrid,
    pub dsm: TerrainGrid,
    pub trees: Vec<TreeRecord>,
    pub intrinsics: CameraIntrinsics,
    pub poses: Vec<CameraPose>,
}

/// Text of every project file a scene emits.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFiles {
    pub pmatrix: String,
    pub offset: String,
    pub dtm: String,
    pub dsm: String,
    pub rows: String,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, String> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offset = WorldOffset { x: spec.offset.0, y: spec.offset.1, z: spec.offset.2 };
    let cs = spec.cellsize;
    let width_m = (spec.trees_per_row - 1) as f64 * spec.spacing;
    let depth_m = (spec.n_rows - 1) as f64 * spec.row_gap;

    // cell centers fall on multiples of the cell size in local coordinates
    let ncols = ((width_m + 2.0 * spec.pad) / cs).round() as usize + 1;
    let nrows = ((depth_m + 2.0 * spec.pad) / cs).round() as usize + 1;
    let xll = offset.x - spec.pad - cs / 2.0;
    let yll = offset.y - spec.pad - cs / 2.0;
    let terrain = spec.terrain;
    let dtm = TerrainGrid::from_fn(ncols, nrows, xll, yll, cs, |x, y| {
        offset.z + terrain.elevation(x - offset.x, y - offset.y)
    });

    let id_format = IdFormat::default();
    let width = id_format.width_for(spec.n_rows.max(spec.trees_per_row - 1));
    let mut dsm = dtm.clone();
    let mut rows = Vec::new();
    let mut trees = Vec::new();
    for r in 0..spec.n_rows {
        let row_id = r + 1;
        let ly = r as f64 * spec.row_gap;
        rows.push(RowSpec {
            row: row_id,
            start_x: offset.x,
            start_y: offset.y + ly,
            end_x: offset.x + width_m,
            end_y: offset.y + ly,
            spacing: spec.spacing,
        });
        for c in 0..spec.trees_per_row {
            let lx = c as f64 * spec.spacing;
            let height = rng.random_range(spec.tree_height.0..=spec.tree_height.1);
            let gcol = ((lx + spec.pad) / cs).round() as usize;
            let grow = nrows - 1 - ((ly + spec.pad) / cs).round() as usize;
            let idx = grow * ncols + gcol;
            let base_z = dtm.values[idx];
            dsm.values[idx] = base_z + height;
            let base = WorldPoint::new(offset.x + lx, offset.y + ly, base_z);
            trees.push(TreeRecord {
                tree_id: id_format.render(row_id, c, width),
                row: row_id,
                col: c,
                base,
                top: WorldPoint::new(base.x, base.y, base_z + height),
                spacing: spec.spacing,
            });
        }
    }

    let intrinsics = CameraIntrinsics::centered(spec.focal_length, spec.image_width, spec.image_height);
    let poses = plan_flight(spec, width_m, depth_m, &intrinsics, &mut rng);
    Ok(Scene { offset, rows, dtm, dsm, trees, intrinsics, poses })
}

fn plan_flight(
    spec: &SceneSpec,
    width_m: f64,
    depth_m: f64,
    intr: &CameraIntrinsics,
    rng: &mut ChaCha8Rng,
) -> Vec<CameraPose> {
    let fp = &spec.flight;
    let pitch = fp.pitch_deg.to_radians();
    let slant = fp.altitude / pitch.sin();
    let footprint = 2.0 * slant * intr.cx / intr.focal_length;
    let step = footprint * (1.0 - fp.overlap);
    let standoff = fp.altitude / pitch.tan();
    let z = spec.terrain.base_level() + fp.altitude;
    let mut jitter = |amp: f64| if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };

    let mut poses = Vec::with_capacity(fp.lines * fp.poses_per_line);
    for line in 0..fp.lines {
        let target_y = (line as f64 + 0.5) * depth_m / fp.lines as f64;
        for i in 0..fp.poses_per_line {
            let x = width_m / 2.0 + (i as f64 - (fp.poses_per_line as f64 - 1.0) / 2.0) * step;
            let position = WorldPoint::new(
                x + jitter(fp.position_jitter),
                target_y - standoff + jitter(fp.position_jitter),
                z + jitter(fp.position_jitter),
            );
            let heading = jitter(fp.heading_jitter_deg).to_radians();
            poses.push(CameraPose {
                image_name: format!("IMG_{:04}.JPG", poses.len() + 1),
                position,
                angles: look_rotation(heading, pitch).to_euler(),
            });
        }
    }
    poses
}

impl Scene {
    pub fn extrinsics(&self, pose: &CameraPose) -> CameraExtrinsics {
        CameraExtrinsics { rotation: build_rotation(pose.angles), translation: pose.position }
    }

    /// Trees moved into the local projection frame.
    pub fn local_trees(&self) -> Vec<TreeRecord> {
        self.trees.iter().map(|t| t.shifted(self.offset.x, self.offset.y, self.offset.z)).collect()
    }

    pub fn image_poses(&self) -> Vec<ImagePose> {
        self.poses
            .iter()
            .map(|p| ImagePose {
                image_name: p.image_name.clone(),
                pmatrix: ProjectionMatrix::from_decomposed(&self.extrinsics(p), &self.intrinsics),
            })
            .collect()
    }

    /// Frames with the decomposed camera model, for in-memory surveys.
    pub fn survey_frames(&self) -> Vec<SurveyFrame> {
        self.poses
            .iter()
            .map(|p| SurveyFrame {
                name: p.image_name.clone(),
                camera: CameraModel::Decomposed { extrinsics: self.extrinsics(p), intrinsics: self.intrinsics },
            })
            .collect()
    }

    pub fn files(&self) -> SceneFiles {
        SceneFiles {
            pmatrix: write_pmatrix(&self.image_poses()),
            offset: write_offset(&self.offset),
            dtm: write_ascii_grid(&self.dtm),
            dsm: write_ascii_grid(&self.dsm),
            rows: write_rows_csv(&self.rows),
        }
    }

    pub fn write_project(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let f = self.files();
        for (name, text) in [
            (PMATRIX_FILE, &f.pmatrix),
            (OFFSET_FILE, &f.offset),
            (DTM_FILE, &f.dtm),
            (DSM_FILE, &f.dsm),
            (ROWS_FILE, &f.rows),
        ] {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    /// Every (image, tree) pair where both tree ends project in front of the
    /// camera and inside the frame, images in name order, trees in scene order.
    pub fn oracle_sightings(&self) -> Vec<TreeSighting> {
        let (w, h) = (self.intrinsics.image_width as f64, self.intrinsics.image_height as f64);
        let mut poses: Vec<&CameraPose> = self.poses.iter().collect();
        poses.sort_by(|a, b| a.image_name.cmp(&b.image_name));
        let mut out = Vec::new();
        for pose in poses {
            let ext = self.extrinsics(pose);
            for tree in self.local_trees() {
                let base_c = world_to_camera(tree.base, &ext);
                let top_c = world_to_camera(tree.top, &ext);
                if base_c.z <= MIN_DEPTH || top_c.z <= MIN_DEPTH {
                    continue;
                }
                let base_px = camera_to_pixel(base_c, &self.intrinsics).expect("depth checked");
                let top_px = camera_to_pixel(top_c, &self.intrinsics).expect("depth checked");
                let inside = |u: f64, v: f64| u >= 0.0 && u < w && v >= 0.0 && v < h;
                if inside(base_px.u, base_px.v) && inside(top_px.u, top_px.v) {
                    out.push(TreeSighting {
                        tree_id: tree.tree_id.clone(),
                        image_name: pose.image_name.clone(),
                        base_px,
                        top_px,
                        depth: base_c.z,
                    });
                }
            }
        }
        out
    }

    /// Ids of trees seen by at least one camera.
    pub fn oracle_visible_ids(&self) -> BTreeSet<String> {
        self.oracle_sightings().into_iter().map(|s| s.tree_id).collect()
    }

    /// Per tree, the first image by name whose sighting yields a usable crop.
    pub fn oracle_manifest(&self, margin: f64) -> CropManifest {
        let sightings = self.oracle_sightings();
        let frame = FrameInfo {
            name: String::new(),
            width: self.intrinsics.image_width,
            height: self.intrinsics.image_height,
            focal: self.intrinsics.focal_length,
        };
        let mut manifest = CropManifest::default();
        for tree in &self.trees {
            let mut found = false;
            // sightings are already in image-name order
            for s in sightings.iter().filter(|s| s.tree_id == tree.tree_id) {
                match plan_crop(s, tree.spacing, frame.focal, margin, (frame.width, frame.height)) {
                    Ok(rect) => {
                        manifest.crops.push(rect);
                        found = true;
                        break;
                    }
                    Err(_) => manifest.skipped.push((s.tree_id.clone(), s.image_name.clone())),
                }
            }
            if !found {
                manifest.missing.push(tree.tree_id.clone());
            }
        }
        manifest.crops.sort();
        manifest.skipped.sort();
        manifest.missing.sort();
        manifest
    }
}

/// Annotation set whose box sizes form tight, known clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedBoxes {
    /// Cluster centers as (w, h) in raw image pixels.
    pub centers: Vec<(f64, f64)>,
    pub per_cluster: usize,
    /// Uniform size noise, pixels.
    pub jitter: f64,
    pub n_images: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub ground_fraction: f64,
    pub seed: u64,
}

impl Default for PlantedBoxes {
    /// Three clusters on an equilateral triangle in (w, h), so the elbow sits at 3.
    fn default() -> Self {
        Self {
            centers: vec![(80.0, 80.0), (230.0, 80.0), (155.0, 210.0)],
            per_cluster: 30,
            jitter: 6.0,
            n_images: 10,
            image_width: 5472,
            image_height: 3648,
            ground_fraction: 0.08,
            seed: 11,
        }
    }
}

/// VOC documents named `APL_0001.JPG` onward holding the planted boxes at random
/// integer positions.
pub fn planted_annotations(p: &PlantedBoxes) -> Vec<VocDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut docs: Vec<VocDocument> = (0..p.n_images.max(1))
        .map(|i| VocDocument {
            filename: format!("APL_{:04}.JPG", i + 1),
            size: Some((p.image_width, p.image_height)),
            objects: Vec::new(),
        })
        .collect();
    for i in 0..p.centers.len() * p.per_cluster {
        let (cw, ch) = p.centers[i % p.centers.len()];
        let noise = |rng: &mut ChaCha8Rng| if p.jitter > 0.0 { rng.random_range(-p.jitter..=p.jitter) } else { 0.0 };
        let w = (cw + noise(&mut rng)).round().clamp(1.0, p.image_width as f64);
        let h = (ch + noise(&mut rng)).round().clamp(1.0, p.image_height as f64);
        let x = rng.random_range(0..=(p.image_width as f64 - w) as u32) as f64;
        let y = rng.random_range(0..=(p.image_height as f64 - h) as u32) as f64;
        let label = if rng.random_bool(p.ground_fraction) { ClassLabel::GroundApple } else { ClassLabel::TreeApple };
        let doc = &mut docs[rng.random_range(0..p.n_images.max(1))];
        doc.objects.push(GroundTruthBox {
            image_name: doc.filename.clone(),
            label,
            bbox: BBox::new(x, y, x + w, y + h),
        });
    }
    docs
}

/// Detector-like output for a set of annotations: each box found with
/// probability `1 - miss_rate`, shifted by up to `shift` pixels, plus
/// `false_per_image` spurious boxes per image at lower confidence.
pub fn noisy_detections(docs: &[VocDocument], miss_rate: f64, shift: f64, false_per_image: usize, seed: u64) -> Vec<Detection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for doc in docs {
        let (w, h) = doc.size.map_or((1000.0, 1000.0), |(w, h)| (w as f64, h as f64));
        for gt in &doc.objects {
            if rng.random_bool(miss_rate) {
                continue;
            }
            let d = |rng: &mut ChaCha8Rng| if shift > 0.0 { rng.random_range(-shift..=shift) } else { 0.0 };
            let b = gt.bbox;
            let moved = BBox::new(b.xmin + d(&mut rng), b.ymin + d(&mut rng), b.xmax + d(&mut rng), b.ymax + d(&mut rng));
            let Some(bbox) = moved.clip(w, h).filter(|b| b.is_valid()) else { continue };
            out.push(Detection {
                image_name: doc.filename.clone(),
                label: gt.label,
                bbox,
                confidence: rng.random_range(0.5..=1.0),
            });
        }
        for _ in 0..false_per_image {
            let bw = rng.random_range(20.0..200.0f64).min(w);
            let bh = rng.random_range(20.0..200.0f64).min(h);
            let x = rng.random_range(0.0..=w - bw);
            let y = rng.random_range(0.0..=h - bh);
            let label = if rng.random_bool(0.5) { ClassLabel::TreeApple } else { ClassLabel::GroundApple };
            out.push(Detection {
                image_name: doc.filename.clone(),
                label,
                bbox: BBox::new(x, y, x + bw, y + bh),
                confidence: rng.random_range(0.0..0.6),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crop::survey;
    use crate::ingest::{parse_ascii_grid, parse_offset, parse_pmatrix, parse_rows_csv};
    use crate::terrain::{build_tree_records, sample_terrain};

    fn small_spec() -> SceneSpec {
        SceneSpec {
            n_rows: 3,
            trees_per_row: 4,
            flight: FlightPlan { lines: 1, poses_per_line: 3, ..FlightPlan::default() },
            ..SceneSpec::default()
        }
        .downscaled(4)
    }

    #[test]
    fn look_rotation_axes() {
        let r = look_rotation(0.0, 0.0);
        let expected = build_rotation(EulerAngles::new(-std::f64::consts::FRAC_PI_2, 0.0, std::f64::consts::PI));
        assert!((r.matrix() - expected.matrix()).amax() < 1e-12);
        for (h, p) in [(0.3, 0.6), (-1.0, 1.2), (2.5, 0.1)] {
            let r = look_rotation(h, p);
            assert!(r.orthonormality_error() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let back = build_rotation(r.to_euler());
            assert!((back.matrix() - r.matrix()).amax() < 1e-12);
        }
    }

    #[test]
    fn single_tree_single_camera() {
        let spec = SceneSpec {
            n_rows: 1,
            trees_per_row: 1,
            terrain: TerrainKind::Flat { z: 0.0 },
            flight: FlightPlan {
                lines: 1,
                poses_per_line: 1,
                position_jitter: 0.0,
                heading_jitter_deg: 0.0,
                ..FlightPlan::default()
            },
            ..SceneSpec::default()
        };
        let mut scene = generate_scene(&spec).unwrap();
        assert_eq!(scene.oracle_sightings().len(), 1);
        assert_eq!(scene.oracle_manifest(0.1).crops.len(), 1);

        // turn the camera around
        let p = &mut scene.poses[0];
        p.angles = look_rotation(std::f64::consts::PI, 35f64.to_radians()).to_euler();
        assert!(scene.oracle_sightings().is_empty());
        assert_eq!(scene.oracle_manifest(0.1).missing, vec!["R01C00".to_string()]);
    }

    #[test]
    fn rasters_reproduce_tree_heights() {
        for terrain in [
            TerrainKind::Flat { z: 3.0 },
            TerrainKind::Inclined { z0: 1.0, gx: 0.05, gy: -0.02 },
            TerrainKind::Sinusoid { z0: 0.0, amplitude: 0.8, wavelength: 13.0 },
        ] {
            let scene = generate_scene(&SceneSpec { terrain, ..small_spec() }).unwrap();
            for t in &scene.trees {
                assert_eq!(sample_terrain(&scene.dtm, t.base.x, t.base.y).unwrap(), t.base.z);
                assert_eq!(sample_terrain(&scene.dsm, t.top.x, t.top.y).unwrap(), t.top.z);
                let local = scene.offset.to_local(t.base);
                assert!((t.base.z - scene.offset.z - terrain.elevation(local.x, local.y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn files_round_trip() {
        let scene = generate_scene(&small_spec()).unwrap();
        let f = scene.files();
        assert_eq!(parse_offset(&f.offset).unwrap(), scene.offset);
        assert_eq!(parse_ascii_grid(&f.dtm).unwrap(), scene.dtm);
        assert_eq!(parse_ascii_grid(&f.dsm).unwrap(), scene.dsm);
        assert_eq!(parse_rows_csv(&f.rows).unwrap(), scene.rows);
        let poses = parse_pmatrix(&f.pmatrix).unwrap();
        assert_eq!(poses, scene.image_poses());

        let rebuilt = build_tree_records(&scene.rows, &scene.dtm, &scene.dsm, IdFormat::default()).unwrap();
        assert_eq!(rebuilt, scene.trees);
    }

    #[test]
    fn in_memory_survey_matches_oracle() {
        let scene = generate_scene(&small_spec()).unwrap();
        let result = survey(&scene.survey_frames(), &scene.local_trees(), 0.1);
        assert_eq!(result.manifest, scene.oracle_manifest(0.1));
        let flat: Vec<TreeSighting> = result.sightings.into_iter().flat_map(|(_, s)| s).collect();
        assert_eq!(flat.len(), scene.oracle_sightings().len());
    }

    #[test]
    fn planted_boxes_have_planted_clusters() {
        use crate::anchors::{elbow, wss_curve, BoxDims, DistanceMetric, KMeansConfig};
        let p = PlantedBoxes::default();
        let docs = planted_annotations(&p);
        let boxes: Vec<BoxDims> = docs
            .iter()
            .flat_map(|d| d.objects.iter().map(|o| BoxDims::new(o.bbox.width(), o.bbox.height())))
            .collect();
        assert_eq!(boxes.len(), 90);
        assert!(docs.iter().flat_map(|d| &d.objects).all(|o| o.bbox.xmax <= 5472.0 && o.bbox.ymax <= 3648.0));
        for metric in [DistanceMetric::Euclidean, DistanceMetric::Iou] {
            let curve = wss_curve(&boxes, 8, &KMeansConfig::new(metric, 3)).unwrap();
            assert_eq!(elbow(&curve), Some(3), "{metric:?}");
        }

        let dets = noisy_detections(&docs, 0.1, 3.0, 2, 5);
        assert!(dets.iter().all(|d| d.bbox.is_valid() && (0.0..=1.0).contains(&d.confidence)));
        assert_eq!(dets, noisy_detections(&docs, 0.1, 3.0, 2, 5));
    }

    #[test]
    fn deterministic_and_validated() {
        let a = generate_scene(&small_spec()).unwrap();
        let b = generate_scene(&small_spec()).unwrap();
        assert_eq!(a.files(), b.files());
        let c = generate_scene(&SceneSpec { seed: 8, ..small_spec() }).unwrap();
        assert_ne!(a.files().pmatrix, c.files().pmatrix);

        let bad = SceneSpec { spacing: 2.3, ..SceneSpec::default() };
        assert!(generate_scene(&bad).is_err());
        let bad = SceneSpec { flight: FlightPlan { overlap: 1.0, ..FlightPlan::default() }, ..SceneSpec::default() };
        assert!(generate_scene(&bad).is_err());
    }
}
