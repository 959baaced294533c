//! Detection scoring: 2D, bird's-eye-view and 3D IoU, greedy TP/FP matching
//! (including the stereo rule that both sides must hit the same object),
//! KITTI difficulty regimes, interpolated AP, and depth-error statistics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Box2D, Box3D, StereoCamera};

/// Collinearity tolerance for polygon clipping, meters.
const CLIP_EPS: f64 = 1e-9;

pub fn iou_2d(a: &Box2D, b: &Box2D) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Shoelace area (positive for counter-clockwise polygons).
pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
}

/// Intersection of two convex counter-clockwise polygons (Sutherland-Hodgman).
pub fn clip_convex(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut output: Vec<(f64, f64)> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let (ex, ey) = (b.0 - a.0, b.1 - a.1);
        let len = (ex * ex + ey * ey).sqrt();
        // signed distance to the edge line, positive on the inner (left) side
        let side = |p: (f64, f64)| (ex * (p.1 - a.1) - ey * (p.0 - a.0)) / len;
        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let (p, q) = (input[j], input[(j + 1) % n]);
            let (sp, sq) = (side(p), side(q));
            let p_in = sp >= -CLIP_EPS;
            let q_in = sq >= -CLIP_EPS;
            if p_in {
                output.push(p);
            }
            if p_in != q_in && (sp - sq).abs() > 0.0 {
                let t = sp / (sp - sq);
                let x = (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
                if (sp.abs() > CLIP_EPS) && (sq.abs() > CLIP_EPS) {
                    output.push(x);
                }
            }
        }
    }
    output
}

/// Footprint intersection area of two boxes in the x-z plane.
pub fn bev_intersection_area(a: &Box3D, b: &Box3D) -> f64 {
    let poly = clip_convex(&a.footprint(), &b.footprint());
    let area = polygon_area(&poly);
    if area <= CLIP_EPS * CLIP_EPS {
        0.0
    } else {
        area
    }
}

pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.w * a.l + b.w * b.l - inter;
    (inter / union).min(1.0)
}

/// Overlap of the vertical extents `[y - h/2, y + h/2]`.
pub fn vertical_overlap(a: &Box3D, b: &Box3D) -> f64 {
    let top = (a.y - a.h / 2.0).max(b.y - b.h / 2.0);
    let bottom = (a.y + a.h / 2.0).min(b.y + b.h / 2.0);
    (bottom - top).max(0.0)
}

pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let height = vertical_overlap(a, b);
    if height == 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * height;
    if inter == 0.0 {
        return 0.0;
    }
    (inter / (a.volume() + b.volume() - inter)).min(1.0)
}

/// A scored detection. Boxes absent from the source are `None` and never match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub class: String,
    pub left: Box2D,
    pub right: Option<Box2D>,
    pub box3d: Option<Box3D>,
    pub alpha: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub class: String,
    pub left: Box2D,
    pub right: Option<Box2D>,
    pub box3d: Box3D,
    pub alpha: f64,
    pub truncation: f64,
    pub occlusion: u8,
    pub object_id: usize,
}

/// Right-image box of a cuboid, clipped to the image like KITTI labels.
pub fn right_box_from_3d(camera: &StereoCamera, b: &Box3D) -> Option<Box2D> {
    let p = crate::geometry::project_box3d(camera, b).ok()?;
    let clipped = camera
        .pixel_box(&p.right)
        .clip(camera.image_width, camera.image_height);
    clipped.is_valid().then_some(clipped)
}

impl DetectionRecord {
    /// Fills the right box by projecting the 3D box when it is missing.
    pub fn attach_right_box(&mut self, camera: &StereoCamera) {
        if self.right.is_none() {
            self.right = self.box3d.as_ref().and_then(|b| right_box_from_3d(camera, b));
        }
    }
}

impl GroundTruthRecord {
    pub fn attach_right_box(&mut self, camera: &StereoCamera) {
        if self.right.is_none() {
            self.right = right_box_from_3d(camera, &self.box3d);
        }
    }
}

/// KITTI difficulty regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    pub fn min_height(self) -> f64 {
        match self {
            Difficulty::Easy => 40.0,
            Difficulty::Moderate | Difficulty::Hard => 25.0,
        }
    }

    pub fn max_occlusion(self) -> u8 {
        match self {
            Difficulty::Easy => 0,
            Difficulty::Moderate => 1,
            Difficulty::Hard => 2,
        }
    }

    pub fn max_truncation(self) -> f64 {
        match self {
            Difficulty::Easy => 0.15,
            Difficulty::Moderate => 0.30,
            Difficulty::Hard => 0.50,
        }
    }

    pub fn admits(self, gt: &GroundTruthRecord) -> bool {
        gt.left.height() >= self.min_height()
            && gt.occlusion <= self.max_occlusion()
            && gt.truncation <= self.max_truncation()
    }

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Moderate => "moderate",
            Difficulty::Hard => "hard",
        }
    }
}

/// Ground truths eligible in a regime.
pub fn difficulty_filter(gts: &[GroundTruthRecord], regime: Difficulty) -> Vec<&GroundTruthRecord> {
    gts.iter().filter(|g| regime.admits(g)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    /// Claimed ground-truth index.
    TruePositive(usize),
    FalsePositive,
    /// Excluded from the curve (matched an ineligible object, or too small).
    Ignored,
}

/// Detection ordering used for matching and for the PR curve: descending
/// score, ties by input order.
pub fn score_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Index of the largest value among `available` entries (first on ties).
fn argmax_available(values: &[f64], available: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .filter(|(g, _)| available(*g))
        .fold(None, |best: Option<(usize, f64)>, (g, &v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((g, v)),
        })
}

/// How a detection picks a ground truth among the currently available ones.
pub enum Matcher<'a> {
    /// Best IoU, which must reach the threshold.
    Single { iou: &'a [Vec<f64>], thresh: f64 },
    /// Best left IoU and best right IoU must both reach the threshold and
    /// point at the same object.
    Stereo {
        left_iou: &'a [Vec<f64>],
        right_iou: &'a [Vec<f64>],
        object_ids: &'a [usize],
        thresh: f64,
    },
}

impl Matcher<'_> {
    fn select(&self, det: usize, available: impl Fn(usize) -> bool + Copy) -> Option<usize> {
        match *self {
            Matcher::Single { iou, thresh } => argmax_available(&iou[det], available)
                .filter(|&(_, v)| v >= thresh)
                .map(|(g, _)| g),
            Matcher::Stereo {
                left_iou,
                right_iou,
                object_ids,
                thresh,
            } => {
                let (gl, vl) = argmax_available(&left_iou[det], available)?;
                let (gr, vr) = argmax_available(&right_iou[det], available)?;
                (vl >= thresh && vr >= thresh && object_ids[gl] == object_ids[gr]).then_some(gl)
            }
        }
    }
}

/// Greedy matching in score order. Each ground truth is claimed at most once.
/// Detections that only match ineligible ground truths are ignored (and claim
/// them); unmatched detections flagged in `ignorable` are ignored as well.
pub fn greedy_match(
    scores: &[f64],
    matcher: &Matcher<'_>,
    eligible: &[bool],
    ignorable: &[bool],
) -> Vec<Outcome> {
    let mut claimed = vec![false; eligible.len()];
    let mut outcomes = vec![Outcome::FalsePositive; scores.len()];
    for d in score_order(scores) {
        if let Some(g) = matcher.select(d, |g| !claimed[g] && eligible[g]) {
            claimed[g] = true;
            outcomes[d] = Outcome::TruePositive(g);
        } else if let Some(g) = matcher.select(d, |g| !claimed[g] && !eligible[g]) {
            claimed[g] = true;
            outcomes[d] = Outcome::Ignored;
        } else if ignorable[d] {
            outcomes[d] = Outcome::Ignored;
        }
    }
    outcomes
}

fn iou_matrix<D, G>(dets: &[D], gts: &[G], iou: impl Fn(&D, &G) -> f64) -> Vec<Vec<f64>> {
    dets.iter()
        .map(|d| gts.iter().map(|g| iou(d, g)).collect())
        .collect()
}

fn right_iou(d: &DetectionRecord, g: &GroundTruthRecord) -> f64 {
    match (&d.right, &g.right) {
        (Some(a), Some(b)) => iou_2d(a, b),
        _ => 0.0,
    }
}

/// Stereo true-positive flags in input order: the left box's best unclaimed
/// left ground truth and the right box's best unclaimed right ground truth
/// must both reach `iou_thresh` and belong to the same object.
pub fn stereo_tp_match(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_thresh: f64,
) -> Vec<bool> {
    let left = iou_matrix(dets, gts, |d, g| iou_2d(&d.left, &g.left));
    let right = iou_matrix(dets, gts, right_iou);
    let ids: Vec<usize> = gts.iter().map(|g| g.object_id).collect();
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    let matcher = Matcher::Stereo {
        left_iou: &left,
        right_iou: &right,
        object_ids: &ids,
        thresh: iou_thresh,
    };
    greedy_match(&scores, &matcher, &vec![true; gts.len()], &vec![false; dets.len()])
        .into_iter()
        .map(|o| matches!(o, Outcome::TruePositive(_)))
        .collect()
}

/// Left-image 2D true-positive flags in input order.
pub fn tp_match_2d(dets: &[DetectionRecord], gts: &[GroundTruthRecord], iou_thresh: f64) -> Vec<bool> {
    let iou = iou_matrix(dets, gts, |d, g| iou_2d(&d.left, &g.left));
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    greedy_match(
        &scores,
        &Matcher::Single {
            iou: &iou,
            thresh: iou_thresh,
        },
        &vec![true; gts.len()],
        &vec![false; dets.len()],
    )
    .into_iter()
    .map(|o| matches!(o, Outcome::TruePositive(_)))
    .collect()
}

/// Recall sampling used for interpolated AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApInterpolation {
    /// Recall in {0, 0.1, ..., 1}.
    Eleven,
    /// Recall in {1/40, 2/40, ..., 1}.
    Forty,
}

impl ApInterpolation {
    pub fn recall_points(self) -> Vec<f64> {
        match self {
            ApInterpolation::Eleven => (0..=10).map(|k| k as f64 / 10.0).collect(),
            ApInterpolation::Forty => (1..=40).map(|k| k as f64 / 40.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// After each detection in score order.
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub ap: f64,
}

/// Interpolated AP: the mean over recall points `r` of the best precision
/// achieved at any recall `>= r` (0 when none).
pub fn average_precision(
    scored: &[(f64, bool)],
    num_gt: usize,
    interpolation: ApInterpolation,
) -> Result<PrCurve> {
    if num_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(scored.len());
    let mut precision = Vec::with_capacity(scored.len());
    for (rank, d) in score_order(&scores).into_iter().enumerate() {
        if scored[d].1 {
            tp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (rank + 1) as f64);
    }
    // best precision at recall >= recall[i]
    let mut envelope = precision.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let points = interpolation.recall_points();
    let mut sum = 0.0;
    for &r in &points {
        let idx = recall.partition_point(|&rc| rc < r);
        if idx < envelope.len() {
            sum += envelope[idx];
        }
    }
    Ok(PrCurve {
        recall,
        precision,
        ap: sum / points.len() as f64,
    })
}

/// Which boxes an evaluation compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Left2d,
    Right2d,
    Stereo2d,
    Bev,
    ThreeD,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Left2d,
        Metric::Right2d,
        Metric::Stereo2d,
        Metric::Bev,
        Metric::ThreeD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Left2d => "2d_left",
            Metric::Right2d => "2d_right",
            Metric::Stereo2d => "2d_stereo",
            Metric::Bev => "bev",
            Metric::ThreeD => "3d",
        }
    }
}

/// Detections and ground truth of one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub detections: Vec<DetectionRecord>,
    pub ground_truth: Vec<GroundTruthRecord>,
}

/// Outcomes of one frame's detections of `class` under a metric and regime.
/// Returns `(scored flags, number of eligible ground truths)`.
pub fn evaluate_frame(
    frame: &Frame,
    class: &str,
    metric: Metric,
    iou_thresh: f64,
    regime: Difficulty,
) -> (Vec<(f64, bool)>, usize) {
    let dets: Vec<&DetectionRecord> = frame.detections.iter().filter(|d| d.class == class).collect();
    let gts: Vec<&GroundTruthRecord> = frame.ground_truth.iter().filter(|g| g.class == class).collect();
    let eligible: Vec<bool> = gts.iter().map(|g| regime.admits(g)).collect();
    let ignorable: Vec<bool> = dets
        .iter()
        .map(|d| d.left.height() < regime.min_height())
        .collect();
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();

    let left = || iou_matrix(&dets, &gts, |d, g| iou_2d(&d.left, &g.left));
    let right = || iou_matrix(&dets, &gts, |d, g| right_iou(d, g));
    let box3d = |f: fn(&Box3D, &Box3D) -> f64| {
        iou_matrix(&dets, &gts, |d, g| d.box3d.as_ref().map_or(0.0, |b| f(b, &g.box3d)))
    };
    let ids: Vec<usize> = gts.iter().map(|g| g.object_id).collect();
    let outcomes = match metric {
        Metric::Left2d => {
            let m = left();
            greedy_match(&scores, &Matcher::Single { iou: &m, thresh: iou_thresh }, &eligible, &ignorable)
        }
        Metric::Right2d => {
            let m = right();
            greedy_match(&scores, &Matcher::Single { iou: &m, thresh: iou_thresh }, &eligible, &ignorable)
        }
        Metric::Stereo2d => {
            let (l, r) = (left(), right());
            let matcher = Matcher::Stereo {
                left_iou: &l,
                right_iou: &r,
                object_ids: &ids,
                thresh: iou_thresh,
            };
            greedy_match(&scores, &matcher, &eligible, &ignorable)
        }
        Metric::Bev => {
            let m = box3d(iou_bev);
            greedy_match(&scores, &Matcher::Single { iou: &m, thresh: iou_thresh }, &eligible, &ignorable)
        }
        Metric::ThreeD => {
            let m = box3d(iou_3d);
            greedy_match(&scores, &Matcher::Single { iou: &m, thresh: iou_thresh }, &eligible, &ignorable)
        }
    };
    let scored = outcomes
        .iter()
        .zip(&scores)
        .filter_map(|(o, &s)| match o {
            Outcome::TruePositive(_) => Some((s, true)),
            Outcome::FalsePositive => Some((s, false)),
            Outcome::Ignored => None,
        })
        .collect();
    (scored, eligible.iter().filter(|&&e| e).count())
}

/// Pools all frames and computes the PR curve for one metric and regime.
pub fn evaluate(
    frames: &[Frame],
    class: &str,
    metric: Metric,
    iou_thresh: f64,
    regime: Difficulty,
    interpolation: ApInterpolation,
) -> Result<PrCurve> {
    let mut pooled = Vec::new();
    let mut num_gt = 0;
    for frame in frames {
        let (scored, n) = evaluate_frame(frame, class, metric, iou_thresh, regime);
        pooled.extend(scored);
        num_gt += n;
    }
    average_precision(&pooled, num_gt, interpolation)
}

/// One row of the AP table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApRow {
    pub metric: Metric,
    pub iou_thresh: f64,
    /// Easy, moderate, hard; `None` when the regime has no ground truth.
    pub ap: [Option<f64>; 3],
}

/// Default table: 2D left/right/stereo at 0.7, BEV and 3D at 0.5 and 0.7.
pub fn standard_table_rows() -> Vec<(Metric, f64)> {
    vec![
        (Metric::Left2d, 0.7),
        (Metric::Right2d, 0.7),
        (Metric::Stereo2d, 0.7),
        (Metric::Bev, 0.5),
        (Metric::Bev, 0.7),
        (Metric::ThreeD, 0.5),
        (Metric::ThreeD, 0.7),
    ]
}

pub fn ap_table(
    frames: &[Frame],
    class: &str,
    rows: &[(Metric, f64)],
    interpolation: ApInterpolation,
) -> Vec<ApRow> {
    rows.iter()
        .map(|&(metric, thresh)| ApRow {
            metric,
            iou_thresh: thresh,
            ap: Difficulty::ALL.map(|r| {
                evaluate(frames, class, metric, thresh, r, interpolation)
                    .ok()
                    .map(|c| c.ap)
            }),
        })
        .collect()
}

/// CSV with header `metric,iou,easy,moderate,hard`; AP in `[0, 1]` with six
/// decimals, empty cell when a regime has no ground truth.
pub fn ap_table_csv(rows: &[ApRow]) -> String {
    let mut out = String::from("metric,iou,easy,moderate,hard\n");
    for row in rows {
        let cells: Vec<String> = row
            .ap
            .iter()
            .map(|a| a.map_or(String::new(), |v| format!("{v:.6}")))
            .collect();
        let _ = writeln!(out, "{},{:.2},{}", row.metric.name(), row.iou_thresh, cells.join(","));
    }
    out
}

/// CSV with header `rank,recall,precision`.
pub fn pr_curve_csv(curve: &PrCurve) -> String {
    let mut out = String::from("rank,recall,precision\n");
    for (i, (r, p)) in curve.recall.iter().zip(&curve.precision).enumerate() {
        let _ = writeln!(out, "{},{r:.6},{p:.6}", i + 1);
    }
    out
}

/// A matched detection/ground-truth depth pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthPair {
    pub z_det: f64,
    pub z_gt: f64,
    pub iou_2d: f64,
}

/// Pairs detections with 3D boxes to ground truth by greedy left-box matching
/// at `min_iou`.
pub fn match_depth_pairs(frames: &[Frame], class: &str, min_iou: f64) -> Vec<DepthPair> {
    let mut pairs = Vec::new();
    for frame in frames {
        let dets: Vec<&DetectionRecord> = frame
            .detections
            .iter()
            .filter(|d| d.class == class && d.box3d.is_some())
            .collect();
        let gts: Vec<&GroundTruthRecord> = frame.ground_truth.iter().filter(|g| g.class == class).collect();
        let iou = iou_matrix(&dets, &gts, |d, g| iou_2d(&d.left, &g.left));
        let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
        let outcomes = greedy_match(
            &scores,
            &Matcher::Single { iou: &iou, thresh: min_iou },
            &vec![true; gts.len()],
            &vec![false; dets.len()],
        );
        for (d, o) in outcomes.iter().enumerate() {
            if let Outcome::TruePositive(g) = *o {
                pairs.push(DepthPair {
                    z_det: dets[d].box3d.as_ref().map(|b| b.z).unwrap_or(f64::NAN),
                    z_gt: gts[g].box3d.z,
                    iou_2d: iou[d][g],
                });
            }
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn quartiles(mut values: Vec<f64>) -> Quartiles {
    values.sort_by(f64::total_cmp);
    Quartiles {
        q25: quantile(&values, 0.25),
        median: quantile(&values, 0.5),
        q75: quantile(&values, 0.75),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthBin {
    pub center: f64,
    pub count: usize,
    /// `|z_det - z_gt|`, meters.
    pub depth_error: Quartiles,
    /// `focal * b * |1/z_det - 1/z_gt|`, pixels.
    pub disparity_error: Quartiles,
}

pub const DEPTH_CURVE_CENTERS: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];
pub const DEPTH_BIN_HALF_WIDTH: f64 = 5.0;
pub const DEPTH_CURVE_MIN_IOU: f64 = 0.7;

/// Error quartiles per distance bin `[center - half, center + half)` over
/// pairs with 2D IoU `>= min_iou`. Empty bins are omitted.
pub fn depth_error_stats(
    pairs: &[DepthPair],
    focal_baseline: f64,
    centers: &[f64],
    half_width: f64,
    min_iou: f64,
) -> Vec<DepthBin> {
    centers
        .iter()
        .filter_map(|&center| {
            let members: Vec<&DepthPair> = pairs
                .iter()
                .filter(|p| p.iou_2d >= min_iou)
                .filter(|p| p.z_gt >= center - half_width && p.z_gt < center + half_width)
                .collect();
            if members.is_empty() {
                return None;
            }
            let depth = members.iter().map(|p| (p.z_det - p.z_gt).abs()).collect();
            let disparity = members
                .iter()
                .map(|p| focal_baseline * (1.0 / p.z_det - 1.0 / p.z_gt).abs())
                .collect();
            Some(DepthBin {
                center,
                count: members.len(),
                depth_error: quartiles(depth),
                disparity_error: quartiles(disparity),
            })
        })
        .collect()
}

/// CSV with header
/// `center_m,count,depth_err_q25,depth_err_median,depth_err_q75,disp_err_q25,disp_err_median,disp_err_q75`.
pub fn depth_bins_csv(bins: &[DepthBin]) -> String {
    let mut out = String::from(
        "center_m,count,depth_err_q25,depth_err_median,depth_err_q75,disp_err_q25,disp_err_median,disp_err_q75\n",
    );
    for b in bins {
        let _ = writeln!(
            out,
            "{:.1},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            b.center,
            b.count,
            b.depth_error.q25,
            b.depth_error.median,
            b.depth_error.q75,
            b.disparity_error.q25,
            b.disparity_error.median,
            b.disparity_error.q75
        );
    }
    out
}
