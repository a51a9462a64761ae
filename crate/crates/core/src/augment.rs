//! Box remapping for dataset augmentation: horizontal mirror and rotation
//! about the image center. Pixel-only ops pass boxes through unchanged.

use crate::bbox::BBox;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const MAX_ROTATION_DEG: f64 = 60.0;
pub const DEFAULT_MIN_VISIBLE: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("rotation {0} deg is outside [-60, 60]")]
    AngleOutOfRange(f64),
    #[error("box lies entirely outside the image after transform")]
    DegenerateBox,
    #[error("min visible fraction {0} must lie in [0, 1]")]
    BadMinVisible(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentSpec {
    MirrorH,
    /// Positive angles turn the image clockwise as displayed.
    Rotate { degrees: f64 },
    /// Blur, noise and similar; boxes are untouched.
    PixelOnly { name: String },
}

impl AugmentSpec {
    pub fn rotate(degrees: f64) -> Result<Self, AugmentError> {
        let s = AugmentSpec::Rotate { degrees };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        match self {
            AugmentSpec::Rotate { degrees } if !(degrees.abs() <= MAX_ROTATION_DEG) => {
                Err(AugmentError::AngleOutOfRange(*degrees))
            }
            _ => Ok(()),
        }
    }

    /// Short tag used in file names and logs, e.g. `mirror_h`, `rot+30`.
    pub fn tag(&self) -> String {
        match self {
            AugmentSpec::MirrorH => "mirror_h".to_string(),
            AugmentSpec::Rotate { degrees } => format!("rot{degrees:+}"),
            AugmentSpec::PixelOnly { name } => name.clone(),
        }
    }
}

impl fmt::Display for AugmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

pub fn mirror_box(b: BBox, image_width: f64) -> BBox {
    BBox {
        xmin: image_width - b.xmax,
        ymin: b.ymin,
        xmax: image_width - b.xmin,
        ymax: b.ymax,
    }
}

/// Axis-aligned hull of the box's corners rotated about the image center,
/// before clipping.
pub fn rotated_hull(b: BBox, degrees: f64, image_width: f64, image_height: f64) -> BBox {
    let (cx, cy) = (image_width / 2.0, image_height / 2.0);
    let (s, c) = degrees.to_radians().sin_cos();
    let corners = [(b.xmin, b.ymin), (b.xmax, b.ymin), (b.xmax, b.ymax), (b.xmin, b.ymax)];
    let mut hull = BBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (x, y) in corners {
        let (dx, dy) = (x - cx, y - cy);
        // image y points down, so this turns clockwise on screen
        let rx = cx + dx * c - dy * s;
        let ry = cy + dx * s + dy * c;
        hull.xmin = hull.xmin.min(rx);
        hull.ymin = hull.ymin.min(ry);
        hull.xmax = hull.xmax.max(rx);
        hull.ymax = hull.ymax.max(ry);
    }
    hull
}

/// Rotated hull clipped to the image. Any angle is accepted here; the ±60°
/// bound is enforced by [`AugmentSpec`].
pub fn rotate_box(b: BBox, degrees: f64, image_width: f64, image_height: f64) -> Result<BBox, AugmentError> {
    rotated_hull(b, degrees, image_width, image_height)
        .clip(image_width, image_height)
        .ok_or(AugmentError::DegenerateBox)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoxOutcome {
    Kept(BBox),
    /// Clipped hull keeps less than the minimum fraction of the unclipped hull.
    Dropped { visible_fraction: f64 },
}

/// Applies `spec` to one box. Rotated boxes keeping less than `min_visible` of
/// their hull area inside the image are dropped.
pub fn apply_to_box(
    spec: &AugmentSpec,
    b: BBox,
    image_width: f64,
    image_height: f64,
    min_visible: f64,
) -> Result<BoxOutcome, AugmentError> {
    spec.validate()?;
    if !(0.0..=1.0).contains(&min_visible) {
        return Err(AugmentError::BadMinVisible(min_visible));
    }
    match spec {
        AugmentSpec::MirrorH => Ok(BoxOutcome::Kept(mirror_box(b, image_width))),
        AugmentSpec::PixelOnly { .. } => Ok(BoxOutcome::Kept(b)),
        AugmentSpec::Rotate { degrees } => {
            let hull = rotated_hull(b, *degrees, image_width, image_height);
            let Some(clipped) = hull.clip(image_width, image_height) else {
                return Ok(BoxOutcome::Dropped { visible_fraction: 0.0 });
            };
            let fraction = if hull.area() > 0.0 { clipped.area() / hull.area() } else { 1.0 };
            if fraction < min_visible {
                Ok(BoxOutcome::Dropped { visible_fraction: fraction })
            } else {
                Ok(BoxOutcome::Kept(clipped))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: BBox, b: BBox, tol: f64) -> bool {
        (a.xmin - b.xmin).abs() <= tol
            && (a.ymin - b.ymin).abs() <= tol
            && (a.xmax - b.xmax).abs() <= tol
            && (a.ymax - b.ymax).abs() <= tol
    }

    #[test]
    fn mirror_examples() {
        assert_eq!(mirror_box(BBox::new(10.0, 20.0, 30.0, 40.0), 100.0), BBox::new(70.0, 20.0, 90.0, 40.0));
        let mid = BBox::new(40.0, 0.0, 60.0, 10.0);
        assert_eq!(mirror_box(mid, 100.0), mid);
    }

    #[test]
    fn rotate_examples() {
        let b = BBox::new(10.0, 20.0, 30.0, 40.0);
        assert_eq!(rotate_box(b, 0.0, 100.0, 80.0).unwrap(), b);

        let centered = BBox::new(49.0, 39.0, 51.0, 41.0);
        let r = rotate_box(centered, 45.0, 100.0, 80.0).unwrap();
        let half = 2f64.sqrt();
        assert!(close(r, BBox::new(50.0 - half, 40.0 - half, 50.0 + half, 40.0 + half), 1e-12));

        let r = rotate_box(BBox::new(40.0, 30.0, 60.0, 50.0), 180.0, 100.0, 80.0).unwrap();
        assert!(close(r, BBox::new(40.0, 30.0, 60.0, 50.0), 1e-12));
    }

    #[test]
    fn clockwise_on_screen() {
        // a point right of center moves down (larger y) under +90
        let b = BBox::new(80.0, 49.0, 82.0, 51.0);
        let r = rotate_box(b, 90.0, 100.0, 100.0).unwrap();
        assert!(close(r, BBox::new(49.0, 80.0, 51.0, 82.0), 1e-9));
    }

    #[test]
    fn rotate_out_of_frame() {
        // wide image: a box at the far left end rotates past the top edge
        let b = BBox::new(0.0, 45.0, 10.0, 55.0);
        assert_eq!(rotate_box(b, 90.0, 1000.0, 100.0), Err(AugmentError::DegenerateBox));
        let out = apply_to_box(&AugmentSpec::Rotate { degrees: 60.0 }, b, 1000.0, 100.0, 0.25).unwrap();
        assert_eq!(out, BoxOutcome::Dropped { visible_fraction: 0.0 });
    }

    #[test]
    fn partial_visibility_threshold() {
        // 20x20 box straddling the right edge of a rotated 200x100 image
        let b = BBox::new(180.0, 40.0, 200.0, 60.0);
        let hull = rotated_hull(b, 30.0, 200.0, 100.0);
        let clipped = hull.clip(200.0, 100.0).unwrap();
        let frac = clipped.area() / hull.area();
        assert!(frac > 0.0 && frac < 1.0);
        let spec = AugmentSpec::Rotate { degrees: 30.0 };
        assert_eq!(apply_to_box(&spec, b, 200.0, 100.0, frac).unwrap(), BoxOutcome::Kept(clipped));
        assert!(matches!(
            apply_to_box(&spec, b, 200.0, 100.0, (frac + 1.0) / 2.0).unwrap(),
            BoxOutcome::Dropped { .. }
        ));
    }

    #[test]
    fn spec_bounds() {
        assert!(AugmentSpec::rotate(60.0).is_ok());
        assert!(AugmentSpec::rotate(-60.0).is_ok());
        assert_eq!(AugmentSpec::rotate(61.0), Err(AugmentError::AngleOutOfRange(61.0)));
        assert!(AugmentSpec::rotate(f64::NAN).is_err());
        let b = BBox::new(1.0, 1.0, 2.0, 2.0);
        assert!(apply_to_box(&AugmentSpec::Rotate { degrees: 90.0 }, b, 10.0, 10.0, 0.25).is_err());
        assert_eq!(
            apply_to_box(&AugmentSpec::PixelOnly { name: "blur".into() }, b, 10.0, 10.0, 0.25).unwrap(),
            BoxOutcome::Kept(b)
        );
        assert_eq!(AugmentSpec::Rotate { degrees: -15.0 }.tag(), "rot-15");
        assert_eq!(AugmentSpec::Rotate { degrees: 30.0 }.tag(), "rot+30");
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..900.0f64, 0.0..500.0f64, 1.0..100.0f64, 1.0..100.0f64).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn mirror_is_involution(x in 0u32..900, y in 0u32..500, w in 1u32..100, h in 1u32..100) {
            // exact for pixel-aligned boxes; arbitrary floats can be off by an ulp
            let b = BBox::new(x as f64, y as f64, (x + w) as f64, (y + h) as f64);
            prop_assert_eq!(mirror_box(mirror_box(b, 1000.0), 1000.0), b);
            let odd = mirror_box(mirror_box(b, 999.0), 999.0);
            prop_assert_eq!(odd, b);
        }

        #[test]
        fn hull_contains_rotated_quad(b in arb_box(), deg in -60.0..60.0f64, t in 0.0..1.0f64, u in 0.0..1.0f64) {
            let (w, h) = (1000.0, 600.0);
            let hull = rotated_hull(b, deg, w, h);
            // any point of the original box, rotated, lands in the hull
            let (px, py) = (b.xmin + t * b.width(), b.ymin + u * b.height());
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (px - w / 2.0, py - h / 2.0);
            let (rx, ry) = (w / 2.0 + dx * c - dy * s, h / 2.0 + dx * s + dy * c);
            let eps = 1e-9;
            prop_assert!(rx >= hull.xmin - eps && rx <= hull.xmax + eps);
            prop_assert!(ry >= hull.ymin - eps && ry <= hull.ymax + eps);
            if let Ok(clipped) = rotate_box(b, deg, w, h) {
                prop_assert!(clipped.xmin >= 0.0 && clipped.ymin >= 0.0 && clipped.xmax <= w && clipped.ymax <= h);
            }
        }

        #[test]
        fn hull_never_shrinks(b in arb_box(), deg in -60.0..60.0f64) {
            let hull = rotated_hull(b, deg, 1000.0, 600.0);
            prop_assert!(hull.area() >= b.area() * (1.0 - 1e-12));
        }
    }
}
