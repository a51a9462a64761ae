//! Batch commands for the orchard pipeline.
//!
//! Every command reads one [`PipelineConfig`], applies flag overrides and writes
//! files under the output directory. Exit codes: 0 success, 1 validation or
//! metric failure, 2 I/O or parse failure.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod fsutil;

use clap::{Args, Parser, Subcommand, ValueEnum};
pub use config::PipelineConfig;
pub use error::{CliError, Result};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "orchard", version, about = "Orchard tree cropping, anchor design and detection evaluation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for k-means restarts, splits and synthetic data.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-image CSV of visible tree bases.
    Tag(SurveyArgs),
    /// One crop per tree plus a manifest.
    Crop(CropArgs),
    /// WSS table for k-means anchor design, optionally an anchor spec for a chosen k.
    Anchors(AnchorArgs),
    /// AP per class, calibrated and plain mAP, and AR.
    Eval(EvalArgs),
    /// Rewrite annotations for mirrored and rotated images.
    Augment(AugmentArgs),
    /// Seeded train/val/test partition of an annotation directory.
    Split(SplitArgs),
    /// Write a synthetic project (survey files, images, annotations, detections).
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SurveyArgs {
    #[arg(long)]
    pub pmatrix: Option<PathBuf>,
    #[arg(long)]
    pub offset: Option<PathBuf>,
    #[arg(long)]
    pub dtm: Option<PathBuf>,
    #[arg(long)]
    pub dsm: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long)]
    pub image_width: Option<u32>,
    #[arg(long)]
    pub image_height: Option<u32>,
    /// Focal length in pixels; estimated from each matrix when omitted.
    #[arg(long)]
    pub focal: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CropArgs {
    #[command(flatten)]
    pub survey: SurveyArgs,
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Euclidean,
    Iou,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnchorArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Emit an anchor spec for this many clusters.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    /// 11-point interpolated AP instead of all-point.
    #[arg(long)]
    pub eleven_point: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// `mirror_h`, `rotate:<degrees>` or `pixel:<name>`; repeatable, replaces the configured list.
    #[arg(long = "op")]
    pub ops: Vec<String>,
    #[arg(long)]
    pub min_visible: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SynthArgs {
    /// Divide the sensor resolution and focal length by this factor.
    #[arg(long, default_value_t = 4)]
    pub downscale: u32,
    /// Skip writing image files.
    #[arg(long)]
    pub no_images: bool,
}

/// Loads the config, applies global overrides and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.paths.output = Some(out);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Tag(a) => commands::survey::tag(cfg, &a),
        Command::Crop(a) => commands::survey::crop(cfg, &a),
        Command::Anchors(a) => commands::anchors::run(cfg, &a),
        Command::Eval(a) => commands::eval::run(cfg, &a),
        Command::Augment(a) => commands::augment::run(cfg, &a),
        Command::Split(a) => commands::split::run(cfg, &a),
        Command::Synth(a) => commands::synth::run(cfg, &a),
    }
}
