//! `eval`: detections CSV against VOC annotations.

use super::load_annotations;
use crate::config::{require, PipelineConfig};
use crate::error::{CliError, Result};
use crate::fsutil::{read_text, write_atomic};
use crate::EvalArgs;
use orchard_core::eval::{evaluate, ApMethod, EvalParams, EvalReport};
use orchard_core::ingest::{parse_detections_csv, ClassLabel, GroundTruthBox};
use std::collections::BTreeSet;
use std::fmt::Write;

/// `class,ap@<thr>` rows, then the summary rows; absent AR is written as `NA`.
pub fn format_report(report: &EvalReport, iou_threshold: f64) -> String {
    let mut out = format!("class,ap@{iou_threshold}\n");
    for label in ClassLabel::ALL {
        writeln!(out, "{label},{:.6}", report.ap(label)).unwrap();
    }
    writeln!(out, "calibrated_map,{:.6}", report.calibrated_map).unwrap();
    writeln!(out, "true_map,{:.6}", report.true_map).unwrap();
    match report.average_recall {
        Some(ar) => writeln!(out, "ar@[.5:.95],{ar:.6}").unwrap(),
        None => writeln!(out, "ar@[.5:.95],NA").unwrap(),
    }
    out
}

pub fn run(mut cfg: PipelineConfig, a: &EvalArgs) -> Result<()> {
    if a.annotations.is_some() {
        cfg.paths.annotations.clone_from(&a.annotations);
    }
    if a.detections.is_some() {
        cfg.paths.detections.clone_from(&a.detections);
    }
    if let Some(t) = a.iou_threshold {
        cfg.eval.iou_threshold = t;
    }
    cfg.eval.eleven_point |= a.eleven_point;
    cfg.validate()?;
    if !(cfg.eval.iou_threshold > 0.0 && cfg.eval.iou_threshold <= 1.0) {
        return Err(CliError::invalid(format!("IoU threshold {} outside (0, 1]", cfg.eval.iou_threshold)));
    }

    let det_path = require(&cfg.paths.detections, "detections")?;
    let dets = parse_detections_csv(&read_text(det_path)?).map_err(|e| CliError::parse(det_path, e))?;
    let docs = load_annotations(require(&cfg.paths.annotations, "annotations")?)?;
    let gts: Vec<GroundTruthBox> = docs.into_iter().flat_map(|(_, d)| d.objects).collect();

    let known: BTreeSet<&str> = gts.iter().map(|g| g.image_name.as_str()).collect();
    let strays = dets.iter().filter(|d| !known.contains(d.image_name.as_str())).count();
    if strays > 0 {
        log::warn!("{strays} detections refer to images without groundtruth; counted as false positives");
    }

    let params = EvalParams {
        iou_threshold: cfg.eval.iou_threshold,
        weights: cfg.eval.weights(),
        method: if cfg.eval.eleven_point { ApMethod::ElevenPoint } else { ApMethod::AllPoint },
        max_dets: cfg.eval.max_dets,
    };
    let report = evaluate(&dets, &gts, &params).map_err(|e| CliError::invalid(e.to_string()))?;
    let text = format_report(&report, params.iou_threshold);
    write_atomic(&cfg.output_dir().join("metrics.csv"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}
