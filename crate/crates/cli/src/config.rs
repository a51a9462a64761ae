//! Pipeline configuration: one TOML file, every field defaulted, flags override.

use crate::error::{CliError, Result};
use crate::fsutil::read_text;
use orchard_core::anchors::{self, AnchorSpec, DistanceMetric};
use orchard_core::augment::{AugmentSpec, DEFAULT_MIN_VISIBLE};
use orchard_core::crop::{DEFAULT_IMAGE_HEIGHT, DEFAULT_IMAGE_WIDTH, DEFAULT_MARGIN};
use orchard_core::eval::ClassWeights;
use orchard_core::rpn;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub camera: CameraConfig,
    pub crop: CropConfig,
    pub anchors: AnchorConfig,
    pub eval: EvalConfig,
    pub augment: AugmentConfig,
    pub split: SplitConfig,
    pub detector: DetectorConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub pmatrix: Option<PathBuf>,
    pub offset: Option<PathBuf>,
    pub dtm: Option<PathBuf>,
    pub dsm: Option<PathBuf>,
    pub rows: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl Paths {
    fn resolve_against(&mut self, base: &Path) {
        for p in [
            &mut self.pmatrix,
            &mut self.offset,
            &mut self.dtm,
            &mut self.dsm,
            &mut self.rows,
            &mut self.images,
            &mut self.annotations,
            &mut self.detections,
            &mut self.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub image_width: u32,
    pub image_height: u32,
    /// Pixels; estimated from each projection matrix when absent.
    pub focal_length: Option<f64>,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { image_width: DEFAULT_IMAGE_WIDTH, image_height: DEFAULT_IMAGE_HEIGHT, focal_length: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropConfig {
    pub margin: f64,
    pub id_min_width: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN, id_min_width: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    pub base_size: f64,
    pub k_max: usize,
    pub metric: DistanceMetric,
    pub restarts: usize,
    pub max_iter: usize,
    pub resize_min: f64,
    pub resize_max: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            base_size: anchors::DEFAULT_BASE_SIZE,
            k_max: 10,
            metric: DistanceMetric::Euclidean,
            restarts: anchors::DEFAULT_RESTARTS,
            max_iter: anchors::DEFAULT_MAX_ITER,
            resize_min: anchors::RESIZE_MIN_DIM,
            resize_max: anchors::RESIZE_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub tree_weight: f64,
    pub ground_weight: f64,
    pub eleven_point: bool,
    pub max_dets: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let w = ClassWeights::default();
        Self {
            iou_threshold: 0.5,
            tree_weight: w.tree_apple,
            ground_weight: w.ground_apple,
            eleven_point: false,
            max_dets: 100,
        }
    }
}

impl EvalConfig {
    pub fn weights(&self) -> ClassWeights {
        ClassWeights { tree_apple: self.tree_weight, ground_apple: self.ground_weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub ops: Vec<AugmentSpec>,
    pub min_visible: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            ops: vec![AugmentSpec::MirrorH, AugmentSpec::Rotate { degrees: 60.0 }],
            min_visible: DEFAULT_MIN_VISIBLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Fraction held out for test; the same fraction of the rest goes to validation.
    pub test_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { test_fraction: 0.2, val_fraction: 0.2 }
    }
}

/// Detector hyperparameters passed through to training tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub resize_min: f64,
    pub resize_max: f64,
    pub feature_stride: u32,
    pub anchors: AnchorSpec,
    pub proposal_nms_iou: f64,
    pub max_proposals: usize,
    pub momentum: f64,
    pub learning_rate: f64,
    pub rpn_lambda: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            resize_min: anchors::RESIZE_MIN_DIM,
            resize_max: anchors::RESIZE_MAX_DIM,
            feature_stride: 16,
            anchors: AnchorSpec::default(),
            proposal_nms_iou: 0.7,
            max_proposals: 150,
            momentum: rpn::DEFAULT_MOMENTUM,
            learning_rate: 0.0003,
            rpn_lambda: rpn::DEFAULT_LAMBDA,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file; relative paths inside it are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_text(path)?;
        let mut cfg: PipelineConfig = toml::from_str(&text).map_err(|e| CliError::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.paths.resolve_against(base);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.eval.weights().validate().map_err(|e| CliError::invalid(e.to_string()))?;
        if !(self.crop.margin >= 0.0) {
            return Err(CliError::invalid(format!("crop margin {} must be non-negative", self.crop.margin)));
        }
        if self.camera.image_width == 0 || self.camera.image_height == 0 {
            return Err(CliError::invalid("image dimensions must be positive"));
        }
        if let Some(f) = self.camera.focal_length {
            if !(f > 0.0) {
                return Err(CliError::invalid(format!("focal length {f} must be positive")));
            }
        }
        for op in &self.augment.ops {
            op.validate().map_err(|e| CliError::invalid(e.to_string()))?;
        }
        let frac_ok = |f: f64| (0.0..1.0).contains(&f);
        if !frac_ok(self.split.test_fraction) || !frac_ok(self.split.val_fraction) {
            return Err(CliError::invalid("split fractions must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// The configured path or an error naming the missing key.
pub fn require<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::invalid(format!("no {key} path given (set paths.{key} or pass --{key})")))
}
