//! Brute-force reference implementations shared by the integration tests.
//! They favour directness over speed and share no code with the library's
//! evaluation routines beyond the record types and `iou_2d`-style formulas
//! restated here.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereobox::eval::{DetectionRecord, Difficulty, Frame, GroundTruthRecord, Metric};
use stereobox::geometry::{Box2D, Box3D};

pub fn box_iou(a: &Box2D, b: &Box2D) -> f64 {
    let w = (a.u_max.min(b.u_max) - a.u_min.max(b.u_min)).max(0.0);
    let h = (a.v_max.min(b.v_max) - a.v_min.max(b.v_min)).max(0.0);
    let inter = w * h;
    if inter <= 0.0 {
        return 0.0;
    }
    let area = |x: &Box2D| (x.u_max - x.u_min) * (x.v_max - x.v_min);
    inter / (area(a) + area(b) - inter)
}

/// Detection indices by descending score; stable for ties.
fn by_score(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort keeps equal scores in input order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && scores[idx[j - 1]] < scores[idx[j]] {
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx
}

/// Interpolated AP by enumerating every prefix of the ranking for every
/// recall point.
pub fn ap_reference(scored: &[(f64, bool)], num_gt: usize, points: &[f64]) -> f64 {
    let scores: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let order = by_score(&scores);
    let mut total = 0.0;
    for &r in points {
        let mut best = 0.0f64;
        for k in 1..=order.len() {
            let tp = order[..k].iter().filter(|&&d| scored[d].1).count();
            let recall = tp as f64 / num_gt as f64;
            let precision = tp as f64 / k as f64;
            if recall >= r && precision > best {
                best = precision;
            }
        }
        total += best;
    }
    total / points.len() as f64
}

/// Best still-unclaimed ground truth by `iou`, first index on ties.
fn best_unclaimed(ious: &[f64], claimed: &[bool], allowed: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for g in 0..ious.len() {
        if claimed[g] || !allowed[g] {
            continue;
        }
        match best {
            Some((_, v)) if v >= ious[g] => {}
            _ => best = Some((g, ious[g])),
        }
    }
    best
}

pub fn stereo_tp_reference(dets: &[DetectionRecord], gts: &[GroundTruthRecord], t: f64) -> Vec<bool> {
    let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
    let mut claimed = vec![false; gts.len()];
    let allowed = vec![true; gts.len()];
    let mut tp = vec![false; dets.len()];
    for d in by_score(&scores) {
        let left: Vec<f64> = gts.iter().map(|g| box_iou(&dets[d].left, &g.left)).collect();
        let right: Vec<f64> = gts
            .iter()
            .map(|g| match (&dets[d].right, &g.right) {
                (Some(a), Some(b)) => box_iou(a, b),
                _ => 0.0,
            })
            .collect();
        let (Some((gl, vl)), Some((gr, vr))) = (
            best_unclaimed(&left, &claimed, &allowed),
            best_unclaimed(&right, &claimed, &allowed),
        ) else {
            continue;
        };
        if vl >= t && vr >= t && gts[gl].object_id == gts[gr].object_id {
            claimed[gl] = true;
            tp[d] = true;
        }
    }
    tp
}

pub fn eligible(g: &GroundTruthRecord, regime: Difficulty) -> bool {
    let (min_h, occ, trunc) = match regime {
        Difficulty::Easy => (40.0, 0, 0.15),
        Difficulty::Moderate => (25.0, 1, 0.30),
        Difficulty::Hard => (25.0, 2, 0.50),
    };
    g.left.v_max - g.left.v_min >= min_h && g.occlusion <= occ && g.truncation <= trunc
}

fn footprint_contains(b: &Box3D, x: f64, z: f64) -> bool {
    let (s, c) = b.theta.sin_cos();
    let (ex, ez) = (x - b.x, z - b.z);
    // inverse of the heading rotation
    let (dx, dz) = (ex * c - ez * s, ex * s + ez * c);
    dx.abs() <= b.w / 2.0 && dz.abs() <= b.l / 2.0
}

fn corners_xz(b: &Box3D) -> Vec<(f64, f64)> {
    let (s, c) = b.theta.sin_cos();
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|&(sx, sz)| {
            let (dx, dz) = (sx * b.w / 2.0, sz * b.l / 2.0);
            (b.x + dx * c + dz * s, b.z - dx * s + dz * c)
        })
        .collect()
}

/// Intersection area of two footprints from the vertex set of the overlap:
/// corners of each rectangle inside the other plus all edge crossings,
/// ordered by angle around their centroid.
pub fn bev_intersection_reference(a: &Box3D, b: &Box3D) -> f64 {
    let (pa, pb) = (corners_xz(a), corners_xz(b));
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let inside = |r: &Box3D, p: (f64, f64)| {
        let (s, c) = r.theta.sin_cos();
        let (ex, ez) = (p.0 - r.x, p.1 - r.z);
        let (dx, dz) = (ex * c - ez * s, ex * s + ez * c);
        dx.abs() <= r.w / 2.0 + 1e-12 && dz.abs() <= r.l / 2.0 + 1e-12
    };
    pts.extend(pa.iter().filter(|&&p| inside(b, p)));
    pts.extend(pb.iter().filter(|&&p| inside(a, p)));
    for i in 0..4 {
        for j in 0..4 {
            let (p, p2) = (pa[i], pa[(i + 1) % 4]);
            let (q, q2) = (pb[j], pb[(j + 1) % 4]);
            let r = (p2.0 - p.0, p2.1 - p.1);
            let sv = (q2.0 - q.0, q2.1 - q.1);
            let den = r.0 * sv.1 - r.1 * sv.0;
            if den.abs() < 1e-15 {
                continue;
            }
            let t = ((q.0 - p.0) * sv.1 - (q.1 - p.1) * sv.0) / den;
            let u = ((q.0 - p.0) * r.1 - (q.1 - p.1) * r.0) / den;
            if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
                pts.push((p.0 + t * r.0, p.1 + t * r.1));
            }
        }
    }
    if pts.len() < 3 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cz = pts.iter().map(|p| p.1).sum::<f64>() / n;
    pts.sort_by(|p, q| (p.1 - cz).atan2(p.0 - cx).total_cmp(&(q.1 - cz).atan2(q.0 - cx)));
    let m = pts.len();
    let twice: f64 = (0..m)
        .map(|i| pts[i].0 * pts[(i + 1) % m].1 - pts[(i + 1) % m].0 * pts[i].1)
        .sum();
    let area = 0.5 * twice.abs();
    if area < 1e-12 {
        0.0
    } else {
        area
    }
}

pub fn bev_iou_reference(a: &Box3D, b: &Box3D) -> f64 {
    let inter = bev_intersection_reference(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.w * a.l + b.w * b.l - inter)
}

pub fn iou_3d_reference(a: &Box3D, b: &Box3D) -> f64 {
    let top = (a.y - a.h / 2.0).max(b.y - b.h / 2.0);
    let bottom = (a.y + a.h / 2.0).min(b.y + b.h / 2.0);
    let inter = bev_intersection_reference(a, b) * (bottom - top).max(0.0);
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.w * a.l * a.h + b.w * b.l * b.h - inter)
}

/// BEV IoU by uniform random sampling over the union's bounding square.
pub fn bev_iou_monte_carlo(a: &Box3D, b: &Box3D, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ra = 0.5 * (a.w.hypot(a.l));
    let rb = 0.5 * (b.w.hypot(b.l));
    let (x0, x1) = ((a.x - ra).min(b.x - rb), (a.x + ra).max(b.x + rb));
    let (z0, z1) = ((a.z - ra).min(b.z - rb), (a.z + ra).max(b.z + rb));
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let x = rng.random_range(x0..x1);
        let z = rng.random_range(z0..z1);
        let (ia, ib) = (footprint_contains(a, x, z), footprint_contains(b, x, z));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}

fn metric_iou(metric: Metric, d: &DetectionRecord, g: &GroundTruthRecord) -> f64 {
    match metric {
        Metric::Left2d | Metric::Stereo2d => box_iou(&d.left, &g.left),
        Metric::Right2d => match (&d.right, &g.right) {
            (Some(a), Some(b)) => box_iou(a, b),
            _ => 0.0,
        },
        Metric::Bev => d.box3d.as_ref().map_or(0.0, |b| bev_iou_reference(b, &g.box3d)),
        Metric::ThreeD => d.box3d.as_ref().map_or(0.0, |b| iou_3d_reference(b, &g.box3d)),
    }
}

/// Per-frame regime outcomes with the ignore rules: a detection matching only
/// ineligible objects, or an unmatched one shorter than the regime's minimum
/// height, is dropped. Returns the pooled AP.
pub fn evaluate_reference(
    frames: &[Frame],
    class: &str,
    metric: Metric,
    t: f64,
    regime: Difficulty,
    points: &[f64],
) -> Option<f64> {
    let min_h = match regime {
        Difficulty::Easy => 40.0,
        _ => 25.0,
    };
    let mut scored = Vec::new();
    let mut num_gt = 0;
    for f in frames {
        let dets: Vec<&DetectionRecord> = f.detections.iter().filter(|d| d.class == class).collect();
        let gts: Vec<&GroundTruthRecord> = f.ground_truth.iter().filter(|g| g.class == class).collect();
        let ok: Vec<bool> = gts.iter().map(|g| eligible(g, regime)).collect();
        let not_ok: Vec<bool> = ok.iter().map(|e| !e).collect();
        num_gt += ok.iter().filter(|&&e| e).count();
        let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
        let mut claimed = vec![false; gts.len()];
        for d in by_score(&scores) {
            let pick = |allowed: &[bool], claimed: &[bool]| -> Option<usize> {
                let a: Vec<f64> = gts.iter().map(|g| metric_iou(metric, dets[d], g)).collect();
                let (ga, va) = best_unclaimed(&a, claimed, allowed)?;
                if va < t {
                    return None;
                }
                if metric == Metric::Stereo2d {
                    let r: Vec<f64> = gts.iter().map(|g| metric_iou(Metric::Right2d, dets[d], g)).collect();
                    let (gr, vr) = best_unclaimed(&r, claimed, allowed)?;
                    if vr < t || gts[ga].object_id != gts[gr].object_id {
                        return None;
                    }
                }
                Some(ga)
            };
            if let Some(g) = pick(&ok, &claimed) {
                claimed[g] = true;
                scored.push((dets[d].score, true));
            } else if let Some(g) = pick(&not_ok, &claimed) {
                claimed[g] = true;
            } else if dets[d].left.v_max - dets[d].left.v_min >= min_h {
                scored.push((dets[d].score, false));
            }
        }
    }
    (num_gt > 0).then(|| ap_reference(&scored, num_gt, points))
}

/// Loads `label_2/`, `det_2/` and `calib/` text files with matching stems,
/// in sorted order.
pub fn load_fixture(dir: &std::path::Path) -> stereobox::Result<Vec<Frame>> {
    let io = |e: std::io::Error| stereobox::Error::Config(e.to_string());
    let mut stems: Vec<String> = std::fs::read_dir(dir.join("label_2"))
        .map_err(io)?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().map(str::to_string))
        .filter_map(|n| n.strip_suffix(".txt").map(str::to_string))
        .collect();
    stems.sort();
    stems
        .iter()
        .map(|s| {
            let read = |sub: &str| std::fs::read_to_string(dir.join(sub).join(format!("{s}.txt"))).map_err(io);
            stereobox::kitti::frame_from_texts(&read("label_2")?, &read("det_2")?, Some(&read("calib")?))
        })
        .collect()
}
