//! Files emitted by a synthetic scene, run through ingest, tree building,
//! projection and crop planning, must reproduce the scene's oracle.

use orchard_core::crop::{survey, SurveyFrame, TreeSighting};
use orchard_core::geometry::CameraModel;
use orchard_core::ingest::{parse_ascii_grid, parse_offset, parse_pmatrix, parse_rows_csv};
use orchard_core::synth::{generate_scene, FlightPlan, Scene, SceneSpec, TerrainKind};
use orchard_core::terrain::{build_tree_records, IdFormat};
use std::collections::BTreeSet;

fn pipeline(scene: &Scene, margin: f64) -> (Vec<TreeSighting>, orchard_core::CropManifest) {
    let files = scene.files();
    let offset = parse_offset(&files.offset).unwrap();
    let dtm = parse_ascii_grid(&files.dtm).unwrap();
    let dsm = parse_ascii_grid(&files.dsm).unwrap();
    let rows = parse_rows_csv(&files.rows).unwrap();
    let trees: Vec<_> = build_tree_records(&rows, &dtm, &dsm, IdFormat::default())
        .unwrap()
        .iter()
        .map(|t| t.shifted(offset.x, offset.y, offset.z))
        .collect();
    let (w, h) = (scene.intrinsics.image_width, scene.intrinsics.image_height);
    let frames: Vec<SurveyFrame> = parse_pmatrix(&files.pmatrix)
        .unwrap()
        .into_iter()
        .map(|p| SurveyFrame {
            name: p.image_name,
            camera: CameraModel::Matrix { pmatrix: p.pmatrix, image_width: w, image_height: h, focal_length: None },
        })
        .collect();
    let result = survey(&frames, &trees, margin);
    let flat = result.sightings.into_iter().flat_map(|(_, s)| s).collect();
    (flat, result.manifest)
}

fn pairs(s: &[TreeSighting]) -> BTreeSet<(String, String)> {
    s.iter().map(|s| (s.image_name.clone(), s.tree_id.clone())).collect()
}

#[test]
fn default_survey_matches_oracle() {
    let scene = generate_scene(&SceneSpec::default()).unwrap();
    assert_eq!(scene.trees.len(), 100);
    assert_eq!(scene.poses.len(), 20);
    let (sightings, manifest) = pipeline(&scene, 0.1);
    let oracle = scene.oracle_sightings();
    assert_eq!(pairs(&sightings), pairs(&oracle));
    for (a, b) in sightings.iter().zip(&oracle) {
        assert!((a.base_px.u - b.base_px.u).abs() < 1e-6 && (a.top_px.v - b.top_px.v).abs() < 1e-6);
    }

    assert_eq!(manifest, scene.oracle_manifest(0.1));
    let ids: Vec<&str> = manifest.crops.iter().map(|c| c.tree_id.as_str()).collect();
    let unique: BTreeSet<&str> = ids.iter().copied().collect();
    assert_eq!(ids.len(), unique.len(), "a tree was cropped twice");
    let visible = scene.oracle_visible_ids();
    assert_eq!(unique.len(), visible.len());
    assert!(manifest.missing.iter().all(|id| !visible.contains(id)));
}

#[test]
fn other_seeds_and_terrains_match_oracle() {
    let terrains = [
        TerrainKind::Flat { z: 12.0 },
        TerrainKind::Inclined { z0: 0.0, gx: 0.03, gy: 0.04 },
        TerrainKind::Sinusoid { z0: 5.0, amplitude: 1.5, wavelength: 17.0 },
    ];
    for (seed, terrain) in (0..6).zip(terrains.iter().cycle()) {
        let spec = SceneSpec {
            seed,
            terrain: *terrain,
            flight: FlightPlan { overlap: 0.3 + 0.1 * seed as f64, ..FlightPlan::default() },
            ..SceneSpec::default()
        }
        .downscaled(4);
        let scene = generate_scene(&spec).unwrap();
        let (sightings, manifest) = pipeline(&scene, 0.1);
        assert_eq!(pairs(&sightings), pairs(&scene.oracle_sightings()), "seed {seed}");
        assert_eq!(manifest, scene.oracle_manifest(0.1), "seed {seed}");
    }
}

#[test]
fn sparse_survey_reports_missing_trees() {
    let spec = SceneSpec {
        flight: FlightPlan { lines: 1, poses_per_line: 2, ..FlightPlan::default() },
        ..SceneSpec::default()
    }
    .downscaled(8);
    let scene = generate_scene(&spec).unwrap();
    let (_, manifest) = pipeline(&scene, 0.0);
    assert!(!manifest.missing.is_empty());
    assert_eq!(manifest.crops.len() + manifest.missing.len(), scene.trees.len());
    assert_eq!(manifest, scene.oracle_manifest(0.0));
}
