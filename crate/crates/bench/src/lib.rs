//! Seeded inputs shared by the benchmarks.

use orchard_core::anchors::BoxDims;
use orchard_core::bbox::BBox;
use orchard_core::crop::SurveyFrame;
use orchard_core::eval::Detection;
use orchard_core::geometry::{
    build_rotation, CameraExtrinsics, CameraIntrinsics, CameraModel, EulerAngles, ProjectionMatrix, WorldPoint,
};
use orchard_core::ingest::{ClassLabel, GroundTruthBox};
use orchard_core::synth::{generate_scene, SceneSpec};
use orchard_core::terrain::TreeRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// An oblique camera 60 m up looking at the origin, in both model forms.
pub fn camera_pair() -> (CameraModel, CameraModel) {
    let extrinsics = CameraExtrinsics {
        rotation: build_rotation(EulerAngles::from_degrees(30.0, 0.0, 0.0)),
        translation: WorldPoint::new(0.0, -35.0, 60.0),
    };
    let intrinsics = CameraIntrinsics::centered(3650.0, 5472, 3648);
    let matrix = CameraModel::Matrix {
        pmatrix: ProjectionMatrix::from_decomposed(&extrinsics, &intrinsics),
        image_width: 5472,
        image_height: 3648,
        focal_length: None,
    };
    (CameraModel::Decomposed { extrinsics, intrinsics }, matrix)
}

pub fn world_points(n: usize, seed: u64) -> Vec<WorldPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| WorldPoint::new(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0), rng.random_range(0.0..5.0)))
        .collect()
}

/// Box sizes scattered around three centers.
pub fn box_dims(n: usize, seed: u64) -> Vec<BoxDims> {
    let centers = [(40.0, 40.0), (120.0, 45.0), (80.0, 130.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (w, h) = centers[i % 3];
            BoxDims::new(w + rng.random_range(-10.0..10.0), h + rng.random_range(-10.0..10.0))
        })
        .collect()
}

/// Ground truth in `images` images and detections that find most of it, plus clutter.
pub fn detection_set(images: usize, per_image: usize, seed: u64) -> (Vec<Detection>, Vec<GroundTruthBox>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut dets, mut gts) = (Vec::new(), Vec::new());
    for i in 0..images {
        let name = format!("B{i:04}.jpg");
        for _ in 0..per_image {
            let (x, y) = (rng.random_range(0.0..900.0), rng.random_range(0.0..900.0));
            let label = if rng.random_bool(0.9) { ClassLabel::TreeApple } else { ClassLabel::GroundApple };
            let bbox = BBox::new(x, y, x + rng.random_range(20.0..90.0), y + rng.random_range(20.0..90.0));
            gts.push(GroundTruthBox { image_name: name.clone(), label, bbox });
            let s = rng.random_range(-6.0..6.0);
            let candidate = Detection {
                image_name: name.clone(),
                label,
                bbox: BBox::new(bbox.xmin + s, bbox.ymin + s, bbox.xmax + s, bbox.ymax + s),
                confidence: rng.random(),
            };
            if rng.random_bool(0.8) {
                dets.push(candidate);
            }
            if rng.random_bool(0.3) {
                let (x, y) = (rng.random_range(0.0..900.0), rng.random_range(0.0..900.0));
                dets.push(Detection {
                    image_name: name.clone(),
                    label,
                    bbox: BBox::new(x, y, x + 50.0, y + 50.0),
                    confidence: rng.random::<f64>() * 0.6,
                });
            }
        }
    }
    (dets, gts)
}

/// Overlapping single-class detections for suppression.
pub fn clustered_detections(n: usize, seed: u64) -> Vec<Detection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..400.0), rng.random_range(0.0..400.0));
            Detection {
                image_name: "nms.jpg".into(),
                label: ClassLabel::TreeApple,
                bbox: BBox::new(x, y, x + rng.random_range(20.0..60.0), y + rng.random_range(20.0..60.0)),
                confidence: rng.random(),
            }
        })
        .collect()
}

/// The default synthetic orchard: local trees and one matrix camera per image.
pub fn survey_fixture() -> (Vec<SurveyFrame>, Vec<TreeRecord>) {
    let scene = generate_scene(&SceneSpec::default()).expect("default scene is valid");
    (scene.survey_frames(), scene.local_trees())
}
