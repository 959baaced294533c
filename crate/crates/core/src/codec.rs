//! Training-target rules for the stereo detector heads: anchor labelling
//! against union boxes, the six-term stereo box offsets, RoI pair sampling,
//! dimension offsets, viewpoint encoding, keypoint bins and stereo NMS.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::iou_2d;
use crate::geometry::{Box2D, Dimensions, Viewpoint};

pub const POSITIVE_IOU: f64 = 0.7;
pub const NEGATIVE_IOU: f64 = 0.3;
pub const FOREGROUND_IOU: f64 = 0.5;
pub const BACKGROUND_IOU_MIN: f64 = 0.1;
/// Columns of the keypoint heatmap.
pub const KEYPOINT_BINS: usize = 28;
/// Conventional car dimension prior `(w, l, h)`, meters.
pub const CAR_DIMENSION_PRIOR: Dimensions = Dimensions {
    w: 1.6,
    l: 3.9,
    h: 1.56,
};

/// Left/right ground-truth boxes of one object and their union.

/// Labeling thresholds, the dimension prior and proposal budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub positive_iou: f64,
    pub negative_iou: f64,
    pub foreground_iou: f64,
    pub background_iou_min: f64,
    pub dimension_prior: Dimensions,
    pub nms_iou: f64,
    pub train_top_k: usize,
    pub test_top_k: usize,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            positive_iou: POSITIVE_IOU,
            negative_iou: NEGATIVE_IOU,
            foreground_iou: FOREGROUND_IOU,
            background_iou_min: BACKGROUND_IOU_MIN,
            dimension_prior: CAR_DIMENSION_PRIOR,
            nms_iou: 0.7,
            train_top_k: TRAIN_TOP_K,
            test_top_k: TEST_TOP_K,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoGroundTruth {
    pub left: Box2D,
    pub right: Box2D,
    pub union: Box2D,
    pub object_id: usize,
}

impl StereoGroundTruth {
    pub fn new(left: Box2D, right: Box2D, object_id: usize) -> Self {
        Self {
            left,
            right,
            union: left.hull(&right),
            object_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnchorLabel {
    /// Index into the ground-truth list.
    Positive(usize),
    Negative,
    Ignore,
}

/// Labels anchors by their best IoU with any union box: `>= 0.7` positive,
/// `< 0.3` negative, otherwise ignored. No best-anchor-per-box forcing.
pub fn label_anchors(anchors: &[Box2D], gts: &[StereoGroundTruth]) -> Vec<AnchorLabel> {
    label_anchors_with(anchors, gts, &CodecConfig::default())
}

pub fn label_anchors_with(
    anchors: &[Box2D],
    gts: &[StereoGroundTruth],
    config: &CodecConfig,
) -> Vec<AnchorLabel> {
    anchors
        .iter()
        .map(|a| {
            let best = gts
                .iter()
                .enumerate()
                .map(|(i, g)| (i, iou_2d(a, &g.union)))
                .fold(None::<(usize, f64)>, |best, (i, iou)| match best {
                    Some((_, b)) if b >= iou => best,
                    _ => Some((i, iou)),
                });
            match best {
                Some((i, iou)) if iou >= config.positive_iou => AnchorLabel::Positive(i),
                Some((_, iou)) if iou >= config.negative_iou => AnchorLabel::Ignore,
                _ => AnchorLabel::Negative,
            }
        })
        .collect()
}

/// Regression offsets `[du, dw, du', dw', dv, dh]` of a stereo box pair
/// relative to a single anchor; the vertical terms are shared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoBoxDelta {
    pub du: f64,
    pub dw: f64,
    pub du_right: f64,
    pub dw_right: f64,
    pub dv: f64,
    pub dh: f64,
}

impl StereoBoxDelta {
    pub fn to_array(&self) -> [f64; 6] {
        [self.du, self.dw, self.du_right, self.dw_right, self.dv, self.dh]
    }
}

fn check_anchor(anchor: &Box2D) -> Result<()> {
    if !(anchor.width() > 1.0 && anchor.height() > 1.0) {
        return Err(Error::DegenerateAnchor {
            width: anchor.width(),
            height: anchor.height(),
        });
    }
    Ok(())
}

pub fn encode_stereo_delta(anchor: &Box2D, gt: &StereoGroundTruth) -> Result<StereoBoxDelta> {
    check_anchor(anchor)?;
    let (au, av) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let (lu, lv) = gt.left.center();
    let (ru, _) = gt.right.center();
    Ok(StereoBoxDelta {
        du: (lu - au) / aw,
        dw: (gt.left.width() / aw).ln(),
        du_right: (ru - au) / aw,
        dw_right: (gt.right.width() / aw).ln(),
        dv: (lv - av) / ah,
        dh: (gt.left.height() / ah).ln(),
    })
}

/// Inverse of [`encode_stereo_delta`]: returns the `(left, right)` boxes.
pub fn decode_stereo_delta(anchor: &Box2D, delta: &StereoBoxDelta) -> Result<(Box2D, Box2D)> {
    check_anchor(anchor)?;
    let (au, av) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let cv = av + delta.dv * ah;
    let h = ah * delta.dh.exp();
    let left = Box2D::from_center(au + delta.du * aw, cv, aw * delta.dw.exp(), h);
    let right = Box2D::from_center(au + delta.du_right * aw, cv, aw * delta.dw_right.exp(), h);
    Ok((left, right))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoiPairLabel {
    /// Index into the ground-truth list.
    Foreground(usize),
    Background,
    Discarded,
}

/// Foreground when the left RoI's best left-GT IoU and the right RoI's IoU with
/// that same object's right box both exceed 0.5; background when either side's
/// best IoU lies in `[0.1, 0.5)`; otherwise discarded.
pub fn sample_roi_pairs(
    left_rois: &[Box2D],
    right_rois: &[Box2D],
    gts: &[StereoGroundTruth],
) -> Vec<RoiPairLabel> {
    sample_roi_pairs_with(left_rois, right_rois, gts, &CodecConfig::default())
}

pub fn sample_roi_pairs_with(
    left_rois: &[Box2D],
    right_rois: &[Box2D],
    gts: &[StereoGroundTruth],
    config: &CodecConfig,
) -> Vec<RoiPairLabel> {
    let best = |roi: &Box2D, side: fn(&StereoGroundTruth) -> &Box2D| {
        gts.iter()
            .enumerate()
            .map(|(i, g)| (i, iou_2d(roi, side(g))))
            .fold(None::<(usize, f64)>, |best, (i, iou)| match best {
                Some((_, b)) if b >= iou => best,
                _ => Some((i, iou)),
            })
    };
    left_rois
        .iter()
        .zip(right_rois)
        .map(|(l, r)| {
            let Some((gi, left_iou)) = best(l, |g| &g.left) else {
                return RoiPairLabel::Discarded;
            };
            let paired_right = iou_2d(r, &gts[gi].right);
            if left_iou > config.foreground_iou && paired_right > config.foreground_iou {
                return RoiPairLabel::Foreground(gi);
            }
            let right_iou = best(r, |g| &g.right).map_or(0.0, |(_, iou)| iou);
            let in_band = |iou: f64| (config.background_iou_min..config.foreground_iou).contains(&iou);
            if in_band(left_iou) || in_band(right_iou) {
                RoiPairLabel::Background
            } else {
                RoiPairLabel::Discarded
            }
        })
        .collect()
}

/// Keypoint heatmap targets: one perspective cell in the 4 x 28 grid (or
/// none) and one column for each boundary keypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeypointTarget {
    /// `(semantic corner index, column)`.
    pub perspective: Option<(usize, usize)>,
    pub left_boundary: usize,
    pub right_boundary: usize,
}

impl KeypointTarget {
    /// One-hot perspective grid; at most one cell is set.
    pub fn perspective_grid(&self) -> [[u8; KEYPOINT_BINS]; 4] {
        let mut grid = [[0u8; KEYPOINT_BINS]; 4];
        if let Some((k, bin)) = self.perspective {
            grid[k][bin] = 1;
        }
        grid
    }
}

/// Column of pixel `u` in a box, `floor((u - u_min) / width * 28)` clamped to `[0, 27]`.
pub fn keypoint_bin(b: &Box2D, u: f64) -> usize {
    let raw = ((u - b.u_min) / b.width() * KEYPOINT_BINS as f64).floor();
    raw.clamp(0.0, (KEYPOINT_BINS - 1) as f64) as usize
}

pub fn encode_keypoint_target(
    left_gt: &Box2D,
    perspective: Option<(f64, usize)>,
    boundaries: (f64, f64),
) -> KeypointTarget {
    let perspective = perspective
        .filter(|&(u, k)| k < 4 && u >= left_gt.u_min && u <= left_gt.u_max)
        .map(|(u, k)| (k, keypoint_bin(left_gt, u)));
    KeypointTarget {
        perspective,
        left_boundary: keypoint_bin(left_gt, boundaries.0),
        right_boundary: keypoint_bin(left_gt, boundaries.1),
    }
}

/// Greedy NMS; returns kept indices by descending score (ties by input order).
pub fn nms(boxes: &[Box2D], scores: &[f64], iou_thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| iou_2d(&boxes[k], &boxes[i]) <= iou_thresh) {
            kept.push(i);
        }
    }
    kept
}

pub const TRAIN_TOP_K: usize = 2000;
pub const TEST_TOP_K: usize = 300;

/// NMS on left and right boxes separately; a pair survives only if kept on
/// both sides. Returns at most `top_k` indices by descending score.
pub fn nms_keep_both(
    left: &[Box2D],
    right: &[Box2D],
    scores: &[f64],
    iou_thresh: f64,
    top_k: usize,
) -> Vec<usize> {
    let left_kept = nms(left, scores, iou_thresh);
    let mut right_mask = vec![false; right.len()];
    for i in nms(right, scores, iou_thresh) {
        right_mask[i] = true;
    }
    left_kept
        .into_iter()
        .filter(|&i| right_mask[i])
        .take(top_k)
        .collect()
}

/// `ln(gt / prior)` per component, ordered `(w, l, h)`.
pub fn encode_dimension_offset(gt: &Dimensions, prior: &Dimensions) -> Result<[f64; 3]> {
    Dimensions::new(gt.w, gt.l, gt.h)?;
    Dimensions::new(prior.w, prior.l, prior.h)?;
    Ok([
        (gt.w / prior.w).ln(),
        (gt.l / prior.l).ln(),
        (gt.h / prior.h).ln(),
    ])
}

pub fn decode_dimension_offset(offset: &[f64; 3], prior: &Dimensions) -> Result<Dimensions> {
    Dimensions::new(
        prior.w * offset[0].exp(),
        prior.l * offset[1].exp(),
        prior.h * offset[2].exp(),
    )
}

/// `(sin alpha, cos alpha)`.
pub fn encode_viewpoint(alpha: Viewpoint) -> (f64, f64) {
    alpha.sin_cos()
}

pub fn decode_viewpoint(sin: f64, cos: f64) -> Viewpoint {
    Viewpoint::from_sin_cos(sin, cos)
}

/// Pyramid anchor layout: one scale per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub scales: Vec<f64>,
    pub ratios: Vec<f64>,
    pub strides: Vec<f64>,
}

impl Default for AnchorSpec {
    fn default() -> Self {
        Self {
            scales: vec![32.0, 64.0, 128.0, 256.0, 512.0],
            ratios: vec![0.5, 1.0, 2.0],
            strides: vec![4.0, 8.0, 16.0, 32.0, 64.0],
        }
    }
}

/// Anchors centered on every stride cell; `ratio` is height / width and the
/// area equals `scale^2`.
pub fn generate_anchors(spec: &AnchorSpec, image_width: u32, image_height: u32) -> Vec<Box2D> {
    let mut anchors = Vec::new();
    for (&scale, &stride) in spec.scales.iter().zip(&spec.strides) {
        let cols = (f64::from(image_width) / stride).ceil() as usize;
        let rows = (f64::from(image_height) / stride).ceil() as usize;
        for r in 0..rows {
            for c in 0..cols {
                let (cu, cv) = ((c as f64 + 0.5) * stride, (r as f64 + 0.5) * stride);
                for &ratio in &spec.ratios {
                    let w = scale / ratio.sqrt();
                    let h = scale * ratio.sqrt();
                    anchors.push(Box2D::from_center(cu, cv, w, h));
                }
            }
        }
    }
    anchors
}
