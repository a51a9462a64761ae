//! Axis-aligned pixel boxes and intersection-over-union.

use serde::{Deserialize, Serialize};

/// Corner-form box in pixel coordinates (`u` right, `v` down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

/// Center-form box: center plus full width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Area, zero for inverted or degenerate boxes.
    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// True when the box has strictly positive width and height.
    pub fn is_valid(&self) -> bool {
        self.xmin < self.xmax
            && self.ymin < self.ymax
            && [self.xmin, self.ymin, self.xmax, self.ymax]
                .iter()
                .all(|v| v.is_finite())
    }

    pub fn to_center(&self) -> CenterBox {
        CenterBox {
            cx: 0.5 * (self.xmin + self.xmax),
            cy: 0.5 * (self.ymin + self.ymax),
            w: self.width(),
            h: self.height(),
        }
    }

    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            xmin: self.xmin.max(other.xmin),
            ymin: self.ymin.max(other.ymin),
            xmax: self.xmax.min(other.xmax),
            ymax: self.ymax.min(other.ymax),
        };
        (b.xmin < b.xmax && b.ymin < b.ymax).then_some(b)
    }

    /// Clip to `[0, width] x [0, height]`. Returns `None` when nothing is left.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        self.intersection(&BBox::new(0.0, 0.0, width, height))
    }
}

impl CenterBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn to_corners(&self) -> BBox {
        BBox {
            xmin: self.cx - 0.5 * self.w,
            ymin: self.cy - 0.5 * self.h,
            xmax: self.cx + 0.5 * self.w,
            ymax: self.cy + 0.5 * self.h,
        }
    }
}

impl From<CenterBox> for BBox {
    fn from(c: CenterBox) -> Self {
        c.to_corners()
    }
}

impl From<BBox> for CenterBox {
    fn from(b: BBox) -> Self {
        b.to_center()
    }
}

/// Intersection area over union area; 0 for disjoint boxes.
///
/// Accepts anything convertible to corner form, so center-form boxes work too.
pub fn iou(a: impl Into<BBox>, b: impl Into<BBox>) -> f64 {
    let a = a.into();
    let b = b.into();
    let inter = match a.intersection(&b) {
        Some(i) => i.area(),
        None => return 0.0,
    };
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// IoU of two boxes given only by their dimensions, placed on a common center.
pub fn iou_cocentered(w1: f64, h1: f64, w2: f64, h2: f64) -> f64 {
    let inter = w1.min(w2) * h1.min(h2);
    let union = w1 * h1 + w2 * h2 - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Counts unit pixels covered by both boxes; integer corners only.
    fn pixel_count_iou(a: (i32, i32, i32, i32), b: (i32, i32, i32, i32)) -> f64 {
        let lo_x = a.0.min(b.0);
        let hi_x = a.2.max(b.2);
        let lo_y = a.1.min(b.1);
        let hi_y = a.3.max(b.3);
        let inside = |r: (i32, i32, i32, i32), x: i32, y: i32| x >= r.0 && x < r.2 && y >= r.1 && y < r.3;
        let (mut inter, mut union) = (0u32, 0u32);
        for x in lo_x..hi_x {
            for y in lo_y..hi_y {
                let (ia, ib) = (inside(a, x, y), inside(b, x, y));
                if ia && ib {
                    inter += 1;
                }
                if ia || ib {
                    union += 1;
                }
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn identical_and_disjoint() {
        let a = BBox::new(3.0, 4.0, 10.0, 12.0);
        assert_eq!(iou(a, a), 1.0);
        assert_eq!(iou(a, BBox::new(20.0, 20.0, 30.0, 30.0)), 0.0);
        // touching edges share no area
        assert_eq!(iou(a, BBox::new(10.0, 4.0, 12.0, 12.0)), 0.0);
    }

    #[test]
    fn overlapping_squares_match_pixel_count() {
        let oracle = pixel_count_iou((0, 0, 2, 2), (1, 1, 3, 3));
        assert_eq!(oracle, 1.0 / 7.0);
        let got = iou(BBox::new(0.0, 0.0, 2.0, 2.0), BBox::new(1.0, 1.0, 3.0, 3.0));
        assert!((got - oracle).abs() < 1e-15);
    }

    #[test]
    fn center_form_accepted() {
        let c = CenterBox::new(1.0, 1.0, 2.0, 2.0);
        let got = iou(c, BBox::new(1.0, 1.0, 3.0, 3.0));
        assert!((got - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn cocentered_matches_general() {
        let got = iou_cocentered(4.0, 2.0, 2.0, 4.0);
        let a = CenterBox::new(0.0, 0.0, 4.0, 2.0);
        let b = CenterBox::new(0.0, 0.0, 2.0, 4.0);
        assert!((got - iou(a, b)).abs() < 1e-15);
        assert!((got - 4.0 / 12.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn integer_boxes_agree_with_pixel_oracle(
            x0 in 0i32..8, y0 in 0i32..8, w0 in 1i32..6, h0 in 1i32..6,
            x1 in 0i32..8, y1 in 0i32..8, w1 in 1i32..6, h1 in 1i32..6,
        ) {
            let a = (x0, y0, x0 + w0, y0 + h0);
            let b = (x1, y1, x1 + w1, y1 + h1);
            let got = iou(
                BBox::new(a.0 as f64, a.1 as f64, a.2 as f64, a.3 as f64),
                BBox::new(b.0 as f64, b.1 as f64, b.2 as f64, b.3 as f64),
            );
            prop_assert!((got - pixel_count_iou(a, b)).abs() < 1e-12);
        }

        #[test]
        fn symmetric_and_bounded(
            x0 in -50.0f64..50.0, y0 in -50.0f64..50.0, w0 in 0.1f64..40.0, h0 in 0.1f64..40.0,
            x1 in -50.0f64..50.0, y1 in -50.0f64..50.0, w1 in 0.1f64..40.0, h1 in 0.1f64..40.0,
        ) {
            let a = BBox::new(x0, y0, x0 + w0, y0 + h0);
            let b = BBox::new(x1, y1, x1 + w1, y1 + h1);
            let ab = iou(a, b);
            prop_assert_eq!(ab, iou(b, a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
