//! Region proposal network training math: anchor labels, box deltas, loss and
//! the momentum update. Desk-scale, for checking numbers rather than training.

use crate::bbox::{iou, BBox, CenterBox};
use thiserror::Error;

pub const POSITIVE_IOU: f64 = 0.7;
pub const NEGATIVE_IOU: f64 = 0.3;
pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
/// Sampled anchors per image mini-batch.
pub const DEFAULT_N_CLS: usize = 256;
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpnError {
    #[error("probability {value} at index {index} is outside [0, 1]")]
    Domain { index: usize, value: f64 },
    #[error("input lengths differ: {what}")]
    LengthMismatch { what: &'static str },
    #[error("normalizer {0} must be positive")]
    BadNormalizer(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorLabel {
    Positive { gt: usize },
    Negative,
    Ignore,
}

impl AnchorLabel {
    /// Target objectness `p*`, or `None` for ignored anchors.
    pub fn target(&self) -> Option<f64> {
        match self {
            AnchorLabel::Positive { .. } => Some(1.0),
            AnchorLabel::Negative => Some(0.0),
            AnchorLabel::Ignore => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxDelta {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

impl BoxDelta {
    pub const fn new(tx: f64, ty: f64, tw: f64, th: f64) -> Self {
        Self { tx, ty, tw, th }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.tx, self.ty, self.tw, self.th]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cls_loss: f64,
    pub reg_loss: f64,
    pub n_cls: f64,
    pub n_reg: f64,
    pub lambda: f64,
    pub total: f64,
}

/// Labels each anchor from its best IoU over `gts`. Only the two thresholds
/// apply; no gt is forced onto its best anchor.
pub fn label_anchors(anchors: &[BBox], gts: &[BBox]) -> Vec<AnchorLabel> {
    anchors
        .iter()
        .map(|a| {
            let best = gts
                .iter()
                .enumerate()
                .map(|(i, g)| (i, iou(*a, *g)))
                .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((i, v)),
                });
            match best {
                Some((gt, v)) if v > POSITIVE_IOU => AnchorLabel::Positive { gt },
                Some((_, v)) if v >= NEGATIVE_IOU => AnchorLabel::Ignore,
                _ => AnchorLabel::Negative,
            }
        })
        .collect()
}

pub fn encode_deltas(anchor: CenterBox, gt: CenterBox) -> BoxDelta {
    BoxDelta {
        tx: (gt.cx - anchor.cx) / anchor.w,
        ty: (gt.cy - anchor.cy) / anchor.h,
        tw: (gt.w / anchor.w).ln(),
        th: (gt.h / anchor.h).ln(),
    }
}

pub fn decode_deltas(anchor: CenterBox, d: BoxDelta) -> CenterBox {
    CenterBox {
        cx: anchor.cx + d.tx * anchor.w,
        cy: anchor.cy + d.ty * anchor.h,
        w: anchor.w * d.tw.exp(),
        h: anchor.h * d.th.exp(),
    }
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_delta(pred: BoxDelta, target: BoxDelta) -> f64 {
    pred.to_array()
        .iter()
        .zip(target.to_array())
        .map(|(p, t)| smooth_l1(p - t))
        .sum()
}

/// Binary log loss with the probability clipped away from 0 and 1 on the side
/// that would blow up; an exact prediction therefore costs exactly 0.
pub fn log_loss(p: f64, target: f64) -> f64 {
    if target >= 0.5 {
        -p.max(PROB_EPS).ln()
    } else {
        -(1.0 - p).max(PROB_EPS).ln()
    }
}

/// `Σ L_cls / n_cls + λ · Σ p* L_reg / n_reg`, skipping ignored anchors.
pub fn rpn_loss(
    probs: &[f64],
    labels: &[AnchorLabel],
    deltas: &[BoxDelta],
    targets: &[BoxDelta],
    lambda: f64,
    n_cls: f64,
    n_reg: f64,
) -> Result<LossBreakdown, RpnError> {
    if probs.len() != labels.len() {
        return Err(RpnError::LengthMismatch { what: "probs vs labels" });
    }
    if deltas.len() != labels.len() || targets.len() != labels.len() {
        return Err(RpnError::LengthMismatch { what: "deltas/targets vs labels" });
    }
    if !(n_cls > 0.0) {
        return Err(RpnError::BadNormalizer("n_cls"));
    }
    if !(n_reg > 0.0) {
        return Err(RpnError::BadNormalizer("n_reg"));
    }
    if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(0.0..=1.0).contains(*p)) {
        return Err(RpnError::Domain { index, value });
    }
    let mut cls_loss = 0.0;
    let mut reg_loss = 0.0;
    for i in 0..labels.len() {
        let Some(t) = labels[i].target() else { continue };
        cls_loss += log_loss(probs[i], t);
        if t == 1.0 {
            reg_loss += smooth_l1_delta(deltas[i], targets[i]);
        }
    }
    Ok(LossBreakdown {
        cls_loss,
        reg_loss,
        n_cls,
        n_reg,
        lambda,
        total: cls_loss / n_cls + lambda * reg_loss / n_reg,
    })
}

/// One momentum step: `v' = γv − ηg`, `θ' = θ + v'`.
pub fn momentum_step(theta: &[f64], grad: &[f64], velocity: &[f64], eta: f64, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(theta.len() == grad.len() && theta.len() == velocity.len(), "length mismatch");
    let update: Vec<f64> = grad.iter().zip(velocity).map(|(g, v)| -eta * g + gamma * v).collect();
    let next = theta.iter().zip(&update).map(|(t, u)| t + u).collect();
    (next, update)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq(x: f64, y: f64, side: f64) -> BBox {
        BBox::new(x, y, x + side, y + side)
    }

    #[test]
    fn labels_by_threshold() {
        let gt = sq(0.0, 0.0, 10.0);
        // 10x10 shifted by 10/3 horizontally: overlap 6.667*10, union 133.3 -> 0.5
        let mid = BBox::new(10.0 / 3.0, 0.0, 10.0 / 3.0 + 10.0, 10.0);
        assert!((iou(mid, gt) - 0.5).abs() < 1e-12);
        let far = BBox::new(0.0, 0.0, 1.0, 10.0); // IoU 0.1
        let labels = label_anchors(&[gt, mid, far], &[sq(50.0, 50.0, 5.0), gt]);
        assert_eq!(labels, vec![AnchorLabel::Positive { gt: 1 }, AnchorLabel::Ignore, AnchorLabel::Negative]);
        assert_eq!(label_anchors(&[gt], &[]), vec![AnchorLabel::Negative]);
    }

    #[test]
    fn threshold_edges() {
        // exactly 0.3 is not "lower than 0.3"; exactly 0.7 is not "greater than 0.7"
        let gt = BBox::new(0.0, 0.0, 10.0, 10.0);
        let a03 = BBox::new(0.0, 0.0, 3.0, 10.0);
        let a07 = BBox::new(0.0, 0.0, 7.0, 10.0);
        assert_eq!(label_anchors(&[a03, a07], &[gt]), vec![AnchorLabel::Ignore, AnchorLabel::Ignore]);
    }

    #[test]
    fn delta_examples() {
        let a = CenterBox::new(10.0, 10.0, 4.0, 4.0);
        assert_eq!(encode_deltas(a, a), BoxDelta::default());
        let d = encode_deltas(a, CenterBox::new(12.0, 10.0, 8.0, 4.0));
        assert_eq!(d, BoxDelta::new(0.5, 0.0, 2f64.ln(), 0.0));
    }

    #[test]
    fn smooth_l1_values() {
        assert_eq!(smooth_l1(0.0), 0.0);
        assert_eq!(smooth_l1(0.5), 0.125);
        assert_eq!(smooth_l1(2.0), 1.5);
        assert_eq!(smooth_l1(-2.0), 1.5);
    }

    #[test]
    fn smooth_l1_c1_at_one() {
        let h = 1e-7;
        for x0 in [1.0, -1.0] {
            let left = (smooth_l1(x0) - smooth_l1(x0 - h)) / h;
            let right = (smooth_l1(x0 + h) - smooth_l1(x0)) / h;
            assert!((left - right).abs() <= 1e-6, "{left} {right}");
            assert!((smooth_l1(x0 - 1e-12) - smooth_l1(x0 + 1e-12)).abs() < 1e-11);
        }
    }

    #[test]
    fn loss_hand_cases() {
        let pos = [AnchorLabel::Positive { gt: 0 }];
        let zero = [BoxDelta::default()];
        let perfect = rpn_loss(&[1.0], &pos, &zero, &zero, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(perfect.total, 0.0);

        let half = rpn_loss(&[0.5], &pos, &zero, &zero, 10.0, 1.0, 1.0).unwrap();
        assert!((half.total - 0.5f64.ln().abs()).abs() < 1e-9);

        let off = rpn_loss(&[0.5], &pos, &[BoxDelta::new(1.0, 0.0, 0.0, 0.0)], &zero, 10.0, 1.0, 1.0).unwrap();
        assert!((off.total - (2f64.ln() + 5.0)).abs() < 1e-9);
    }

    #[test]
    fn ignore_and_negatives() {
        let labels = [AnchorLabel::Ignore, AnchorLabel::Negative, AnchorLabel::Negative];
        let big = [BoxDelta::new(5.0, 5.0, 5.0, 5.0); 3];
        let zero = [BoxDelta::default(); 3];
        // ignored anchor contributes nothing, negatives have no regression term
        let l = rpn_loss(&[0.9, 0.0, 0.0], &labels, &big, &zero, 10.0, 256.0, 2400.0).unwrap();
        assert_eq!(l.total, 0.0);
        let l = rpn_loss(&[0.0, 0.5, 0.0], &labels, &zero, &zero, 1.0, 2.0, 1.0).unwrap();
        assert!((l.total - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn loss_errors() {
        let pos = [AnchorLabel::Positive { gt: 0 }];
        let zero = [BoxDelta::default()];
        assert_eq!(
            rpn_loss(&[1.5], &pos, &zero, &zero, 10.0, 1.0, 1.0),
            Err(RpnError::Domain { index: 0, value: 1.5 })
        );
        assert!(rpn_loss(&[f64::NAN], &pos, &zero, &zero, 10.0, 1.0, 1.0).is_err());
        assert!(rpn_loss(&[0.5, 0.5], &pos, &zero, &zero, 10.0, 1.0, 1.0).is_err());
        assert!(rpn_loss(&[0.5], &pos, &zero, &zero, 10.0, 0.0, 1.0).is_err());
        // p = 0 on a positive is clipped, not infinite
        let l = rpn_loss(&[0.0], &pos, &zero, &zero, 10.0, 1.0, 1.0).unwrap();
        assert!((l.total + PROB_EPS.ln()).abs() < 1e-12);
    }

    #[test]
    fn momentum_examples() {
        let (t, v) = momentum_step(&[0.0], &[1.0], &[0.0], 0.1, 0.9);
        assert_eq!((t[0], v[0]), (-0.1, -0.1));
        let (t, v) = momentum_step(&t, &[1.0], &v, 0.1, 0.9);
        assert!((v[0] + 0.19).abs() < 1e-15);
        assert!((t[0] + 0.29).abs() < 1e-15);

        let (t, _) = momentum_step(&[3.0, -1.0], &[2.0, 4.0], &[7.0, 7.0], 0.5, 0.0);
        assert_eq!(t, vec![2.0, -3.0]);
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        // f(x) = 2 (x - 3)^2, grad 4 (x - 3); stable for eta < 0.5
        let (mut theta, mut vel) = (vec![-10.0], vec![0.0]);
        for _ in 0..100 {
            let g = [4.0 * (theta[0] - 3.0)];
            (theta, vel) = momentum_step(&theta, &g, &vel, 0.2, 0.0);
        }
        assert!((theta[0] - 3.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(
            acx in -500.0..500.0f64, acy in -500.0..500.0f64, aw in 1.0..400.0f64, ah in 1.0..400.0f64,
            gcx in -500.0..500.0f64, gcy in -500.0..500.0f64, gw in 1.0..400.0f64, gh in 1.0..400.0f64,
        ) {
            let a = CenterBox::new(acx, acy, aw, ah);
            let g = CenterBox::new(gcx, gcy, gw, gh);
            let back = decode_deltas(a, encode_deltas(a, g));
            prop_assert!((back.cx - g.cx).abs() < 1e-9);
            prop_assert!((back.cy - g.cy).abs() < 1e-9);
            prop_assert!((back.w - g.w).abs() < 1e-9);
            prop_assert!((back.h - g.h).abs() < 1e-9);
        }

        #[test]
        fn labeling_is_monotone(gx in 0.0..50.0f64, w in 5.0..40.0f64, s1 in 0.0..40.0f64, s2 in 0.0..40.0f64) {
            // sliding the anchor closer to the gt never lowers its label
            let gt = BBox::new(gx, 0.0, gx + w, w);
            let (near, far) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let a_near = BBox::new(gx + near, 0.0, gx + near + w, w);
            let a_far = BBox::new(gx + far, 0.0, gx + far + w, w);
            let rank = |l: AnchorLabel| match l { AnchorLabel::Negative => 0, AnchorLabel::Ignore => 1, AnchorLabel::Positive { .. } => 2 };
            let l = label_anchors(&[a_near, a_far], &[gt]);
            prop_assert!(rank(l[0]) >= rank(l[1]));
        }

        #[test]
        fn loss_zero_iff_perfect(
            raw in proptest::collection::vec((0u8..3, any::<bool>(), -2.0..2.0f64), 1..20),
        ) {
            let labels: Vec<AnchorLabel> = raw.iter().map(|r| match r.0 {
                0 => AnchorLabel::Negative, 1 => AnchorLabel::Ignore, _ => AnchorLabel::Positive { gt: 0 },
            }).collect();
            let targets: Vec<BoxDelta> = raw.iter().map(|r| BoxDelta::new(r.2, -r.2, r.2 / 2.0, 0.1)).collect();
            let probs: Vec<f64> = labels.iter().map(|l| l.target().unwrap_or(0.3)).collect();
            let perfect = rpn_loss(&probs, &labels, &targets, &targets, 10.0, 256.0, 100.0).unwrap();
            prop_assert_eq!(perfect.total, 0.0);

            // perturb one scored anchor
            if let Some(i) = labels.iter().position(|l| l.target().is_some()) {
                let mut p = probs.clone();
                let mut d = targets.clone();
                if raw[i].1 || labels[i] == AnchorLabel::Negative {
                    p[i] = 0.5;
                } else {
                    d[i].tx += 0.25;
                }
                let l = rpn_loss(&p, &labels, &d, &targets, 10.0, 256.0, 100.0).unwrap();
                prop_assert!(l.total > 0.0);
            }
        }
    }
}
