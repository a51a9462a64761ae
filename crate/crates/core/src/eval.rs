//! Detection metrics: NMS, greedy matching, VOC average precision at a single
//! IoU threshold, the class-weighted ("calibrated") mAP and average recall over
//! IoU 0.50:0.05:0.95.
//!
//! Confidence ties are broken by input order everywhere (stable sorts), so
//! results depend only on the order detections are supplied in.

use crate::bbox::{iou, BBox};
use crate::ingest::{ClassLabel, GroundTruthBox};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("class weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error("AP {0} outside [0, 1]")]
    ApOutOfRange(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_name: String,
    pub label: ClassLabel,
    pub bbox: BBox,
    pub confidence: f64,
}

/// Indices of `confidences` sorted descending; ties keep input order.
fn confidence_order(confidences: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));
    order
}

/// Greedy non-maximum suppression for a single class.
///
/// Keeps the most confident box, drops every remaining box whose IoU with it
/// exceeds `iou_threshold`, and repeats. Output is sorted by confidence.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let conf: Vec<f64> = dets.iter().map(|d| d.confidence).collect();
    let order = confidence_order(&conf);
    let mut suppressed = vec![false; dets.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(dets[i].clone());
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(dets[i].bbox, dets[j].bbox) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// TP/FP flag per detection (aligned with the input), for one image and one class.
///
/// Detections are visited by descending confidence; each claims the unmatched
/// groundtruth box it overlaps most, provided the IoU reaches `iou_threshold`.
pub fn match_detections(boxes: &[BBox], confidences: &[f64], gts: &[BBox], iou_threshold: f64) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    let mut flags = vec![false; boxes.len()];
    for i in confidence_order(confidences) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let o = iou(boxes[i], *gt);
            if best.is_none_or(|(_, b)| o > b) {
                best = Some((g, o));
            }
        }
        if let Some((g, o)) = best {
            if o >= iou_threshold {
                taken[g] = true;
                flags[i] = true;
            }
        }
    }
    flags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApMethod {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean of the envelope at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// `(recall, precision)` after each detection in confidence order.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

pub fn average_precision(flags: &[bool], confidences: &[f64], n_gt: usize) -> PrCurve {
    average_precision_with(flags, confidences, n_gt, ApMethod::AllPoint)
}

pub fn average_precision_with(
    flags: &[bool],
    confidences: &[f64],
    n_gt: usize,
    method: ApMethod,
) -> PrCurve {
    assert_eq!(flags.len(), confidences.len(), "one flag per confidence");
    if n_gt == 0 {
        let ap = if flags.is_empty() {
            log::info!("no groundtruth and no detections: AP taken as 1");
            1.0
        } else {
            0.0
        };
        return PrCurve {
            points: vec![(0.0, 0.0); flags.len()],
            ap,
        };
    }

    let mut points = Vec::with_capacity(flags.len());
    let (mut tp, mut seen) = (0usize, 0usize);
    for i in confidence_order(confidences) {
        seen += 1;
        if flags[i] {
            tp += 1;
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / seen as f64));
    }

    let ap = match method {
        ApMethod::AllPoint => {
            let mut rec = Vec::with_capacity(points.len() + 2);
            let mut prec = Vec::with_capacity(points.len() + 2);
            rec.push(0.0);
            prec.push(0.0);
            for &(r, p) in &points {
                rec.push(r);
                prec.push(p);
            }
            rec.push(1.0);
            prec.push(0.0);
            for i in (0..prec.len() - 1).rev() {
                prec[i] = prec[i].max(prec[i + 1]);
            }
            let mut ap = 0.0;
            for i in 0..rec.len() - 1 {
                if rec[i + 1] != rec[i] {
                    ap += (rec[i + 1] - rec[i]) * prec[i + 1];
                }
            }
            ap
        }
        ApMethod::ElevenPoint => {
            (0..=10)
                .map(|t| {
                    let t = t as f64 / 10.0;
                    points
                        .iter()
                        .filter(|(r, _)| *r >= t)
                        .map(|(_, p)| *p)
                        .fold(0.0, f64::max)
                })
                .sum::<f64>()
                / 11.0
        }
    };
    PrCurve { points, ap }
}

/// Per-class weights for the calibrated mAP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    pub tree_apple: f64,
    pub ground_apple: f64,
}

impl Default for ClassWeights {
    /// Instance ratio 92:8 between the two classes.
    fn default() -> Self {
        Self {
            tree_apple: 0.92,
            ground_apple: 0.08,
        }
    }
}

impl ClassWeights {
    pub fn validate(&self) -> Result<(), EvalError> {
        let sum = self.tree_apple + self.ground_apple;
        if (sum - 1.0).abs() > 1e-9 || self.tree_apple < 0.0 || self.ground_apple < 0.0 {
            return Err(EvalError::WeightSum(sum));
        }
        Ok(())
    }
}

fn check_ap(ap: f64) -> Result<f64, EvalError> {
    if (0.0..=1.0).contains(&ap) {
        Ok(ap)
    } else {
        Err(EvalError::ApOutOfRange(ap))
    }
}

/// `w_tree · AP(tree_apple) + w_ground · AP(ground_apple)`.
pub fn calibrated_map(ap_tree: f64, ap_ground: f64, weights: ClassWeights) -> Result<f64, EvalError> {
    weights.validate()?;
    Ok(weights.tree_apple * check_ap(ap_tree)? + weights.ground_apple * check_ap(ap_ground)?)
}

/// Unweighted mean over the two classes.
pub fn true_map(ap_tree: f64, ap_ground: f64) -> Result<f64, EvalError> {
    Ok(0.5 * (check_ap(ap_tree)? + check_ap(ap_ground)?))
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn recall_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

type GroupKey<'a> = (&'a str, ClassLabel);

fn group_gts(gts: &[GroundTruthBox]) -> BTreeMap<GroupKey<'_>, Vec<BBox>> {
    let mut out: BTreeMap<GroupKey<'_>, Vec<BBox>> = BTreeMap::new();
    for g in gts {
        out.entry((g.image_name.as_str(), g.label)).or_default().push(g.bbox);
    }
    out
}

/// Mean over the ten IoU thresholds of the fraction of groundtruth boxes
/// recalled, keeping at most `max_dets` most confident detections per image.
/// `None` when there is no groundtruth.
pub fn average_recall(dets: &[Detection], gts: &[GroundTruthBox], max_dets: usize) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let mut per_image: BTreeMap<&str, Vec<&Detection>> = BTreeMap::new();
    for d in dets {
        per_image.entry(d.image_name.as_str()).or_default().push(d);
    }
    let mut groups: BTreeMap<GroupKey<'_>, Vec<&Detection>> = BTreeMap::new();
    for (image, list) in per_image {
        let conf: Vec<f64> = list.iter().map(|d| d.confidence).collect();
        for i in confidence_order(&conf).into_iter().take(max_dets) {
            groups.entry((image, list[i].label)).or_default().push(list[i]);
        }
    }
    let gt_groups = group_gts(gts);

    let thresholds = recall_thresholds();
    let mut total = 0.0;
    for &t in &thresholds {
        let mut matched = 0usize;
        for (key, boxes_gt) in &gt_groups {
            let Some(ds) = groups.get(key) else { continue };
            let boxes: Vec<BBox> = ds.iter().map(|d| d.bbox).collect();
            let conf: Vec<f64> = ds.iter().map(|d| d.confidence).collect();
            matched += match_detections(&boxes, &conf, boxes_gt, t)
                .into_iter()
                .filter(|f| *f)
                .count();
        }
        total += matched as f64 / gts.len() as f64;
    }
    Some(total / thresholds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub iou_threshold: f64,
    pub weights: ClassWeights,
    pub method: ApMethod,
    pub max_dets: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            weights: ClassWeights::default(),
            method: ApMethod::AllPoint,
            max_dets: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResult {
    pub label: ClassLabel,
    pub n_gt: usize,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<ClassResult>,
    pub calibrated_map: f64,
    pub true_map: f64,
    pub average_recall: Option<f64>,
}

impl EvalReport {
    pub fn ap(&self, label: ClassLabel) -> f64 {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .map_or(0.0, |c| c.curve.ap)
    }
}

/// Pools detections per class across all images (VOC convention).
pub fn evaluate(dets: &[Detection], gts: &[GroundTruthBox], params: &EvalParams) -> Result<EvalReport, EvalError> {
    params.weights.validate()?;
    let gt_groups = group_gts(gts);

    let mut classes = Vec::new();
    for label in ClassLabel::ALL {
        // (input index, flag, confidence)
        let mut scored: Vec<(usize, bool, f64)> = Vec::new();
        let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, d) in dets.iter().enumerate().filter(|(_, d)| d.label == label) {
            by_image.entry(d.image_name.as_str()).or_default().push(i);
        }
        for (image, idx) in by_image {
            let boxes: Vec<BBox> = idx.iter().map(|&i| dets[i].bbox).collect();
            let conf: Vec<f64> = idx.iter().map(|&i| dets[i].confidence).collect();
            let empty = Vec::new();
            let gt = gt_groups.get(&(image, label)).unwrap_or(&empty);
            let flags = match_detections(&boxes, &conf, gt, params.iou_threshold);
            scored.extend(idx.iter().zip(flags).map(|(&i, f)| (i, f, dets[i].confidence)));
        }
        scored.sort_by_key(|s| s.0);
        let flags: Vec<bool> = scored.iter().map(|s| s.1).collect();
        let conf: Vec<f64> = scored.iter().map(|s| s.2).collect();
        let n_gt = gts.iter().filter(|g| g.label == label).count();
        classes.push(ClassResult {
            label,
            n_gt,
            curve: average_precision_with(&flags, &conf, n_gt, params.method),
        });
    }

    let ap_tree = classes[0].curve.ap;
    let ap_ground = classes[1].curve.ap;
    Ok(EvalReport {
        calibrated_map: calibrated_map(ap_tree, ap_ground, params.weights)?,
        true_map: true_map(ap_tree, ap_ground)?,
        average_recall: average_recall(dets, gts, params.max_dets),
        classes,
    })
}
