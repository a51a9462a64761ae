//! Non-neural machinery of an orchard apple detection pipeline.
//!
//! - [`geometry`]: pinhole projection from world to pixel coordinates.
//! - [`terrain`]: elevation rasters and per-tree base/top coordinates.
//! - [`ingest`]: photogrammetry, raster, annotation and CSV formats.
//! - [`crop`]: visibility, crop rectangles and one-crop-per-tree assignment.
//! - [`anchors`]: anchor grids and k-means anchor design.
//! - [`rpn`]: anchor labels, box deltas, loss and momentum update.
//! - [`eval`]: NMS, AP, calibrated mAP and AR.
//! - [`augment`]: box remapping for mirrored and rotated images.
//! - [`synth`]: synthetic orchards with exact groundtruth.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anchors;
pub mod augment;
pub mod bbox;
pub mod crop;
pub mod eval;
pub mod geometry;
pub mod ingest;
pub mod rpn;
pub mod synth;
pub mod terrain;

pub use anchors::{AnchorShape, AnchorShapes, AnchorSpec, BoxDims, ClusterResult, DistanceMetric, KMeansConfig};
pub use augment::AugmentSpec;
pub use bbox::{iou, BBox, CenterBox};
pub use crop::{CropManifest, CropRect, TreeSighting};
pub use eval::{ClassWeights, Detection, EvalReport, PrCurve};
pub use geometry::{
    CameraExtrinsics, CameraIntrinsics, CameraModel, CameraPoint, EulerAngles, PixelPoint, ProjectionMatrix,
    RotationMatrix, WorldPoint,
};
pub use ingest::{ClassLabel, GroundTruthBox, IngestError, WorldOffset};
pub use rpn::{AnchorLabel, BoxDelta, LossBreakdown};
pub use terrain::{RowSpec, TerrainGrid, TreeRecord};
