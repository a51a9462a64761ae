//! RPN anchor grids and k-means design of anchor shapes from groundtruth boxes.
//!
//! Two distances are supported: Euclidean on `(w, h)` and `1 - IoU` between
//! co-centered boxes. WSS is the sum of squared distances to the assigned
//! centroid under the chosen distance.

use crate::bbox::{iou_cocentered, CenterBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BASE_SIZE: f64 = 256.0;
pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;
/// Keep-aspect-ratio resizer bounds used before feature extraction.
pub const RESIZE_MIN_DIM: f64 = 600.0;
pub const RESIZE_MAX_DIM: f64 = 1024.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnchorError {
    #[error("need at least {k} boxes for k = {k}, got {n}")]
    InsufficientBoxes { k: usize, n: usize },
    #[error("k must be at least 1")]
    ZeroClusters,
    #[error("box dimensions must be positive, got {w} x {h}")]
    InvalidBox { w: f64, h: f64 },
}

/// Width and height of a groundtruth box, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDims {
    pub w: f64,
    pub h: f64,
}

impl BoxDims {
    pub const fn new(w: f64, h: f64) -> Self {
        Self { w, h }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    Iou,
}

impl DistanceMetric {
    pub fn distance(&self, a: BoxDims, b: BoxDims) -> f64 {
        match self {
            DistanceMetric::Euclidean => (a.w - b.w).hypot(a.h - b.h),
            DistanceMetric::Iou => 1.0 - iou_cocentered(a.w, a.h, b.w, b.h),
        }
    }

    pub fn squared(&self, a: BoxDims, b: BoxDims) -> f64 {
        match self {
            DistanceMetric::Euclidean => {
                let (dw, dh) = (a.w - b.w, a.h - b.h);
                dw * dw + dh * dh
            }
            DistanceMetric::Iou => {
                let d = 1.0 - iou_cocentered(a.w, a.h, b.w, b.h);
                d * d
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroids: Vec<BoxDims>,
    pub assignments: Vec<usize>,
    pub wss: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub metric: DistanceMetric,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
}

impl KMeansConfig {
    pub fn new(metric: DistanceMetric, seed: u64) -> Self {
        Self {
            metric,
            seed,
            restarts: DEFAULT_RESTARTS,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Scale factor of the keep-aspect-ratio resizer: shorter side to `min_dim`
/// unless that pushes the longer side past `max_dim`.
pub fn resize_scale(width: f64, height: f64, min_dim: f64, max_dim: f64) -> f64 {
    let short = width.min(height);
    let long = width.max(height);
    let s = min_dim / short;
    if long * s > max_dim {
        max_dim / long
    } else {
        s
    }
}

fn wss_of(boxes: &[BoxDims], centroids: &[BoxDims], assignments: &[usize], metric: DistanceMetric) -> f64 {
    boxes
        .iter()
        .zip(assignments)
        .map(|(b, &a)| metric.squared(*b, centroids[a]))
        .sum()
}

fn nearest(b: BoxDims, centroids: &[BoxDims], metric: DistanceMetric) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = metric.squared(b, *c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// k-means++ seeding under the chosen distance.
fn seed_centroids(boxes: &[BoxDims], k: usize, metric: DistanceMetric, rng: &mut ChaCha8Rng) -> Vec<BoxDims> {
    let mut centroids = vec![boxes[rng.random_range(0..boxes.len())]];
    let mut d2: Vec<f64> = boxes.iter().map(|b| metric.squared(*b, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut idx = d2.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if target < *d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..boxes.len())
        };
        let c = boxes[pick];
        centroids.push(c);
        for (slot, b) in d2.iter_mut().zip(boxes) {
            *slot = slot.min(metric.squared(*b, c));
        }
    }
    centroids
}

fn cluster_cost(members: &[BoxDims], c: BoxDims, metric: DistanceMetric) -> f64 {
    members.iter().map(|b| metric.squared(*b, c)).sum()
}

fn mean(members: &[BoxDims]) -> BoxDims {
    let n = members.len() as f64;
    BoxDims::new(
        members.iter().map(|b| b.w).sum::<f64>() / n,
        members.iter().map(|b| b.h).sum::<f64>() / n,
    )
}

/// New centroid for one cluster. The mean is exact for Euclidean distance; for
/// IoU distance the mean is kept only if it does not raise the cluster's cost,
/// then the medoid is tried, else the centroid stays put.
fn update_centroid(members: &[BoxDims], current: BoxDims, metric: DistanceMetric) -> BoxDims {
    let m = mean(members);
    if metric == DistanceMetric::Euclidean {
        return m;
    }
    let cur_cost = cluster_cost(members, current, metric);
    if cluster_cost(members, m, metric) <= cur_cost {
        return m;
    }
    let medoid = members
        .iter()
        .copied()
        .map(|c| (cluster_cost(members, c, metric), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
        .unwrap_or(current);
    if cluster_cost(members, medoid, metric) <= cur_cost {
        medoid
    } else {
        current
    }
}

/// Lloyd iterations from the given centroids. WSS never increases between steps.
fn lloyd(boxes: &[BoxDims], mut centroids: Vec<BoxDims>, metric: DistanceMetric, max_iter: usize) -> ClusterResult {
    let k = centroids.len();
    let mut assignments: Vec<usize> = boxes.iter().map(|b| nearest(*b, &centroids, metric).0).collect();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut members: Vec<Vec<BoxDims>> = vec![Vec::new(); k];
        for (b, &a) in boxes.iter().zip(&assignments) {
            members[a].push(*b);
        }
        for (j, m) in members.iter().enumerate() {
            if !m.is_empty() {
                centroids[j] = update_centroid(m, centroids[j], metric);
            }
        }
        // An empty cluster takes over the worst-served box.
        for j in 0..k {
            if members[j].is_empty() {
                let far = (0..boxes.len())
                    .max_by(|&a, &b| {
                        let da = metric.squared(boxes[a], centroids[assignments[a]]);
                        let db = metric.squared(boxes[b], centroids[assignments[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("boxes is non-empty");
                centroids[j] = boxes[far];
                assignments[far] = j;
            }
        }

        let mut changed = false;
        for (i, b) in boxes.iter().enumerate() {
            let cur = metric.squared(*b, centroids[assignments[i]]);
            let (best, d) = nearest(*b, &centroids, metric);
            if d < cur {
                assignments[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let wss = wss_of(boxes, &centroids, &assignments, metric);
    ClusterResult {
        centroids,
        assignments,
        wss,
        iterations,
    }
}

fn validate(boxes: &[BoxDims], k: usize) -> Result<(), AnchorError> {
    if k == 0 {
        return Err(AnchorError::ZeroClusters);
    }
    if boxes.len() < k {
        return Err(AnchorError::InsufficientBoxes { k, n: boxes.len() });
    }
    if let Some(b) = boxes.iter().find(|b| !(b.w > 0.0 && b.h > 0.0)) {
        return Err(AnchorError::InvalidBox { w: b.w, h: b.h });
    }
    Ok(())
}

fn best_of(runs: impl IntoIterator<Item = ClusterResult>) -> ClusterResult {
    // strict `<` keeps the earliest run on ties
    runs.into_iter()
        .reduce(|best, r| if r.wss < best.wss { r } else { best })
        .expect("at least one run")
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Best of `config.restarts` seeded k-means runs, by WSS.
pub fn kmeans_boxes(boxes: &[BoxDims], k: usize, config: &KMeansConfig) -> Result<ClusterResult, AnchorError> {
    validate(boxes, k)?;
    let runs = (0..config.restarts.max(1)).map(|r| {
        let mut rng = restart_rng(config.seed, r);
        let init = seed_centroids(boxes, k, config.metric, &mut rng);
        lloyd(boxes, init, config.metric, config.max_iter)
    });
    Ok(best_of(runs))
}

/// WSS for k = 1..=k_max. Each k also tries a warm start from the previous best
/// centroids plus the worst-served box, which keeps the curve non-increasing.
pub fn wss_curve(boxes: &[BoxDims], k_max: usize, config: &KMeansConfig) -> Result<Vec<(usize, f64)>, AnchorError> {
    validate(boxes, k_max.max(1))?;
    let mut curve = Vec::with_capacity(k_max);
    let mut prev: Option<ClusterResult> = None;
    for k in 1..=k_max {
        let mut best = kmeans_boxes(boxes, k, config)?;
        if let Some(p) = &prev {
            let far = (0..boxes.len())
                .max_by(|&a, &b| {
                    let da = config.metric.squared(boxes[a], p.centroids[p.assignments[a]]);
                    let db = config.metric.squared(boxes[b], p.centroids[p.assignments[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("boxes is non-empty");
            let mut init = p.centroids.clone();
            init.push(boxes[far]);
            let warm = lloyd(boxes, init, config.metric, config.max_iter);
            best = best_of([best, warm]);
        }
        curve.push((k, best.wss));
        prev = Some(best);
    }
    Ok(curve)
}

/// k with the largest second difference `wss[k-1] - 2 wss[k] + wss[k+1]`.
/// Needs at least three points; ties go to the smaller k.
pub fn elbow(curve: &[(usize, f64)]) -> Option<usize> {
    curve
        .windows(3)
        .map(|w| (w[1].0, w[0].1 - 2.0 * w[1].1 + w[2].1))
        .fold(None, |best: Option<(usize, f64)>, (k, d)| match best {
            Some((_, bd)) if bd >= d => best,
            _ => Some((k, d)),
        })
        .map(|(k, _)| k)
}

/// One anchor shape: `scale` relative to the base size, `aspect_ratio = h / w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorShape {
    pub scale: f64,
    pub aspect_ratio: f64,
}

/// How the per-location anchor shapes are listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorShapes {
    /// Every scale combined with every aspect ratio.
    Grid { scales: Vec<f64>, aspect_ratios: Vec<f64> },
    /// Explicit (scale, ratio) pairs, e.g. from clustering.
    Pairs(Vec<AnchorShape>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub base_size: f64,
    pub shapes: AnchorShapes,
    pub height_stride: u32,
    pub width_stride: u32,
}

impl Default for AnchorSpec {
    /// Baseline grid: scales 0.25–2, ratios 0.5–2, stride 16.
    fn default() -> Self {
        Self {
            base_size: DEFAULT_BASE_SIZE,
            shapes: AnchorShapes::Grid {
                scales: vec![0.25, 0.5, 1.0, 2.0],
                aspect_ratios: vec![0.5, 1.0, 2.0],
            },
            height_stride: 16,
            width_stride: 16,
        }
    }
}

impl AnchorSpec {
    /// Shapes in generation order (scales outer, ratios inner for grids).
    pub fn shape_list(&self) -> Vec<AnchorShape> {
        match &self.shapes {
            AnchorShapes::Grid { scales, aspect_ratios } => scales
                .iter()
                .flat_map(|&scale| {
                    aspect_ratios
                        .iter()
                        .map(move |&aspect_ratio| AnchorShape { scale, aspect_ratio })
                })
                .collect(),
            AnchorShapes::Pairs(p) => p.clone(),
        }
    }

    pub fn anchors_per_location(&self) -> usize {
        match &self.shapes {
            AnchorShapes::Grid { scales, aspect_ratios } => scales.len() * aspect_ratios.len(),
            AnchorShapes::Pairs(p) => p.len(),
        }
    }

    /// Width and height of every shape; area is `(base · scale)²` whatever the ratio.
    pub fn dims(&self) -> Vec<BoxDims> {
        self.shape_list()
            .iter()
            .map(|s| {
                let side = self.base_size * s.scale;
                let r = s.aspect_ratio.sqrt();
                BoxDims::new(side / r, side * r)
            })
            .collect()
    }
}

/// Feature map size for an image at the given stride (partial cells count).
pub fn feature_map_size(image_w: u32, image_h: u32, stride: u32) -> (u32, u32) {
    (image_w.div_ceil(stride), image_h.div_ceil(stride))
}

/// Anchors for every feature-map cell, row-major, shapes in [`AnchorSpec::shape_list`] order.
pub fn generate_anchor_grid(spec: &AnchorSpec, fmap_w: u32, fmap_h: u32) -> Vec<CenterBox> {
    let dims = spec.dims();
    let (sx, sy) = (spec.width_stride as f64, spec.height_stride as f64);
    let mut out = Vec::with_capacity(fmap_w as usize * fmap_h as usize * dims.len());
    for row in 0..fmap_h {
        let cy = row as f64 * sy + sy / 2.0;
        for col in 0..fmap_w {
            let cx = col as f64 * sx + sx / 2.0;
            out.extend(dims.iter().map(|d| CenterBox::new(cx, cy, d.w, d.h)));
        }
    }
    out
}

/// Turns cluster centroids into explicit anchor shapes:
/// `scale = √(w·h) / base_size`, `ratio = h / w`. Strides come from the baseline.
pub fn centroids_to_anchor_spec(centroids: &[BoxDims], base_size: f64) -> AnchorSpec {
    let pairs = centroids
        .iter()
        .map(|c| AnchorShape {
            scale: (c.w * c.h).sqrt() / base_size,
            aspect_ratio: c.h / c.w,
        })
        .collect();
    AnchorSpec {
        base_size,
        shapes: AnchorShapes::Pairs(pairs),
        ..AnchorSpec::default()
    }
}
