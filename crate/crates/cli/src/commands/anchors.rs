//! `anchors`: WSS curves under both distances and, on request, an anchor spec.

use super::load_annotations;
use crate::config::{require, PipelineConfig};
use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;
use crate::{AnchorArgs, MetricArg};
use orchard_core::anchors::{
    centroids_to_anchor_spec, elbow, kmeans_boxes, resize_scale, wss_curve, AnchorSpec, BoxDims, DistanceMetric,
    KMeansConfig,
};
use serde::Serialize;
use std::fmt::Write;

#[derive(Serialize)]
struct Fragment<'a> {
    detector: DetectorFragment<'a>,
}

#[derive(Serialize)]
struct DetectorFragment<'a> {
    anchors: &'a AnchorSpec,
}

pub fn run(mut cfg: PipelineConfig, a: &AnchorArgs) -> Result<()> {
    if a.annotations.is_some() {
        cfg.paths.annotations.clone_from(&a.annotations);
    }
    if let Some(k) = a.k_max {
        cfg.anchors.k_max = k;
    }
    if let Some(m) = a.metric {
        cfg.anchors.metric = match m {
            MetricArg::Euclidean => DistanceMetric::Euclidean,
            MetricArg::Iou => DistanceMetric::Iou,
        };
    }
    if let Some(r) = a.restarts {
        cfg.anchors.restarts = r;
    }
    cfg.validate()?;
    let ac = &cfg.anchors;
    let docs = load_annotations(require(&cfg.paths.annotations, "annotations")?)?;

    // cluster in the detector's resized-image space
    let mut boxes = Vec::new();
    let mut dims_csv = String::from("image,label,w,h\n");
    for (_, doc) in &docs {
        let (w, h) = doc.size.unwrap_or((cfg.camera.image_width, cfg.camera.image_height));
        let s = resize_scale(w as f64, h as f64, ac.resize_min, ac.resize_max);
        for o in &doc.objects {
            let b = BoxDims::new(o.bbox.width() * s, o.bbox.height() * s);
            writeln!(dims_csv, "{},{},{},{}", o.image_name, o.label, b.w, b.h).unwrap();
            boxes.push(b);
        }
    }
    if boxes.is_empty() {
        return Err(CliError::invalid("no groundtruth boxes found; need at least 1"));
    }
    let mut k_max = ac.k_max.max(1);
    if k_max > boxes.len() {
        log::warn!("k_max {k_max} exceeds the {} boxes available; clamped", boxes.len());
        k_max = boxes.len();
    }

    let config = |metric| KMeansConfig { metric, seed: cfg.seed, restarts: ac.restarts, max_iter: ac.max_iter };
    let invalid = |e: orchard_core::anchors::AnchorError| CliError::invalid(e.to_string());
    let euclid = wss_curve(&boxes, k_max, &config(DistanceMetric::Euclidean)).map_err(invalid)?;
    let iou = wss_curve(&boxes, k_max, &config(DistanceMetric::Iou)).map_err(invalid)?;
    let mut wss_csv = String::from("k,wss_euclid,wss_iou\n");
    for ((k, we), (_, wi)) in euclid.iter().zip(&iou) {
        writeln!(wss_csv, "{k},{we},{wi}").unwrap();
    }

    let dir = cfg.output_dir().join("anchors");
    write_atomic(&dir.join("wss.csv"), wss_csv.as_bytes())?;
    write_atomic(&dir.join("box_dims.csv"), dims_csv.as_bytes())?;
    let show = |e: Option<usize>| e.map_or("n/a".to_string(), |k| k.to_string());
    println!(
        "{} boxes; elbow suggestion: k={} (euclidean), k={} (iou)",
        boxes.len(),
        show(elbow(&euclid)),
        show(elbow(&iou))
    );

    if let Some(k) = a.k {
        let result = kmeans_boxes(&boxes, k, &config(ac.metric)).map_err(invalid)?;
        let spec = centroids_to_anchor_spec(&result.centroids, ac.base_size);
        let mut centroids_csv = String::from("cluster,w,h,scale,aspect_ratio,members\n");
        for (i, (c, shape)) in result.centroids.iter().zip(spec.shape_list()).enumerate() {
            let members = result.assignments.iter().filter(|&&j| j == i).count();
            writeln!(centroids_csv, "{i},{},{},{},{},{members}", c.w, c.h, shape.scale, shape.aspect_ratio).unwrap();
        }
        let fragment = toml::to_string(&Fragment { detector: DetectorFragment { anchors: &spec } })
            .map_err(|e| CliError::invalid(e.to_string()))?;
        write_atomic(&dir.join("centroids.csv"), centroids_csv.as_bytes())?;
        write_atomic(&dir.join("anchors.toml"), fragment.as_bytes())?;
        println!("wrote {k} anchor shapes ({:?} metric, WSS {})", ac.metric, result.wss);
    }
    Ok(())
}
