//! Coarse 3D box estimation from stereo box edges and the perspective keypoint.
//!
//! Seven normalized measurements are related to the box state `(x, y, z, theta)`
//! through pinhole projections of specific cuboid corners. Which corner produces
//! which edge depends on where the camera sits relative to the footprint; that
//! assignment is the [`Correspondence`]. The state is found by damped
//! Gauss-Newton on the reprojection residuals, with an extra viewpoint residual
//! `alpha - theta - arctan(-x/z)` whenever the keypoint is not usable.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    wrap_angle, Box2D, Box3D, Dimensions, StereoCamera, StereoDetection, Viewpoint,
    NormalizedBox2D,
};

/// Index of each measurement in a [`MeasurementSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measurement {
    /// Left edge of the left box.
    LeftU,
    /// Top edge (shared by both boxes).
    TopV,
    /// Right edge of the left box.
    RightU,
    /// Bottom edge (shared by both boxes).
    BottomV,
    /// Left edge of the right box.
    StereoLeftU,
    /// Right edge of the right box.
    StereoRightU,
    /// Perspective keypoint column in the left image.
    KeypointU,
}

impl Measurement {
    pub const ALL: [Measurement; 7] = [
        Measurement::LeftU,
        Measurement::TopV,
        Measurement::RightU,
        Measurement::BottomV,
        Measurement::StereoLeftU,
        Measurement::StereoRightU,
        Measurement::KeypointU,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    fn in_right_eye(self) -> bool {
        matches!(self, Measurement::StereoLeftU | Measurement::StereoRightU)
    }

    fn is_vertical(self) -> bool {
        matches!(self, Measurement::TopV | Measurement::BottomV)
    }
}

/// The seven sparse measurements, normalized by the intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub values: [f64; 7],
    pub valid: [bool; 7],
    pub alpha: Viewpoint,
}

impl MeasurementSet {
    /// All box edges valid; the keypoint is valid iff given.
    pub fn from_boxes(
        left: &NormalizedBox2D,
        right: &NormalizedBox2D,
        keypoint_u: Option<f64>,
        alpha: Viewpoint,
    ) -> Self {
        let values = [
            left.u_l,
            left.v_t,
            left.u_r,
            left.v_b,
            right.u_l,
            right.u_r,
            keypoint_u.unwrap_or(f64::NAN),
        ];
        let mut valid = [true; 7];
        valid[6] = keypoint_u.is_some();
        Self {
            values,
            valid,
            alpha,
        }
    }

    pub fn get(&self, m: Measurement) -> Option<f64> {
        self.valid[m.index()].then(|| self.values[m.index()])
    }

    pub fn invalidate(&mut self, m: Measurement) {
        self.valid[m.index()] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn validate(&self) -> Result<()> {
        let valid = self.valid_count();
        if valid < 4 {
            return Err(Error::TooFewMeasurements { valid });
        }
        let ordered = |a: Measurement, b: Measurement| match (self.get(a), self.get(b)) {
            (Some(lo), Some(hi)) => lo < hi,
            _ => true,
        };
        if !ordered(Measurement::LeftU, Measurement::RightU)
            || !ordered(Measurement::StereoLeftU, Measurement::StereoRightU)
            || !ordered(Measurement::TopV, Measurement::BottomV)
        {
            return Err(Error::InvalidBox("measurement edges out of order"));
        }
        Ok(())
    }
}

/// Corner (0..8, see [`crate::geometry::CORNER_SIGNS`]) generating each measurement.
/// `None` for the keypoint when no side corner is visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Correspondence {
    pub corners: [Option<usize>; 7],
}

impl Correspondence {
    pub fn corner(&self, m: Measurement) -> Option<usize> {
        self.corners[m.index()]
    }

    /// Exact assignment for a given box state: silhouette corners per eye from
    /// the camera position in the object frame, top/bottom corners from the
    /// depth ordering and from which side of the optical axis each face lies.
    pub fn for_box(camera: &StereoCamera, b: &Box3D) -> Self {
        let (hw, hl) = (b.w / 2.0, b.l / 2.0);
        let (la, lb) = b.camera_in_object_frame(0.0);
        let (ra, rb) = b.camera_in_object_frame(camera.baseline);
        let left = view_sector(la, lb, hw, hl);
        let right = view_sector(ra, rb, hw, hl);

        let near = nearest_depth_corner(b.theta);
        let far = (near + 2) % 4;
        let top = if b.y - b.h / 2.0 < 0.0 { near } else { far };
        let bottom = if b.y + b.h / 2.0 > 0.0 { near } else { far };
        Self {
            corners: [
                Some(left.left),
                Some(top + 4),
                Some(left.right),
                Some(bottom),
                Some(right.left),
                Some(right.right),
                left.visible,
            ],
        }
    }
}

/// Silhouette of the footprint seen from one camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Sector {
    left: usize,
    right: usize,
    visible: Option<usize>,
}

/// Classifies the camera position `(a, b)` (object frame) into one of the
/// eight regions around the footprint and returns the silhouette corners.
fn view_sector(a: f64, b: f64, hw: f64, hl: f64) -> Sector {
    let sa = if a > hw {
        1
    } else if a < -hw {
        -1
    } else {
        0
    };
    let sb = if b > hl {
        1
    } else if b < -hl {
        -1
    } else {
        0
    };
    match (sa, sb) {
        // Corner-on: the facing corner k projects inside, its neighbours bound the box.
        (1, -1) => corner_on(1),
        (1, 1) => corner_on(2),
        (-1, 1) => corner_on(3),
        (-1, -1) => corner_on(0),
        // Face-on: the two corners of the facing side bound the box.
        (1, 0) => face_on(1),
        (0, 1) => face_on(2),
        (-1, 0) => face_on(3),
        _ => face_on(0),
    }
}

fn corner_on(k: usize) -> Sector {
    Sector {
        left: (k + 3) % 4,
        right: (k + 1) % 4,
        visible: Some(k),
    }
}

fn face_on(i: usize) -> Sector {
    Sector {
        left: i,
        right: (i + 1) % 4,
        visible: None,
    }
}

/// Bottom corner with the smallest camera depth for heading `theta`.
fn nearest_depth_corner(theta: f64) -> usize {
    let (s, c) = theta.sin_cos();
    // depth offset = -dx sin + dz cos; minimise with dx = sign(s), dz = -sign(c)
    let sx = if s >= 0.0 { 1.0 } else { -1.0 };
    let sz = if c > 0.0 { -1.0 } else { 1.0 };
    crate::geometry::CORNER_SIGNS
        .iter()
        .position(|&(a, b)| a == sx && b == sz)
        .expect("sign pair is one of the four corners")
}

/// Far-field correspondence from the viewpoint alone.
///
/// The circle is split into four corner-on sectors and four face-on sectors;
/// in the far field the face-on sectors shrink to `alpha` in `{0, ±pi/2, pi}`.
/// Top and bottom edges are assigned to the nearest corner, as for an object
/// on the optical axis whose top lies above it.
pub fn infer_correspondence(alpha: Viewpoint) -> Correspondence {
    const FACE_TOL: f64 = 1e-12;
    let (s, c) = alpha.alpha.sin_cos();
    let sector = view_sector(s, -c, FACE_TOL, FACE_TOL);
    let near = nearest_depth_corner(alpha.alpha);
    Correspondence {
        corners: [
            Some(sector.left),
            Some(near + 4),
            Some(sector.right),
            Some(near),
            Some(sector.left),
            Some(sector.right),
            sector.visible,
        ],
    }
}

/// Edge-truncation margin in pixels.
pub const TRUNCATION_MARGIN_PX: f64 = 2.0;

/// Converts a pixel-space detection to normalized measurements, dropping edges
/// within `margin_px` of the image border.
pub fn extract_measurements(camera: &StereoCamera, det: &StereoDetection) -> Result<MeasurementSet> {
    extract_measurements_with_margin(camera, det, TRUNCATION_MARGIN_PX)
}

pub fn extract_measurements_with_margin(
    camera: &StereoCamera,
    det: &StereoDetection,
    margin_px: f64,
) -> Result<MeasurementSet> {
    if !det.left.is_valid() || !det.right.is_valid() {
        return Err(Error::InvalidBox("detection boxes must be valid"));
    }
    let max_u = f64::from(camera.image_width) - 1.0 - margin_px;
    let max_v = f64::from(camera.image_height) - 1.0 - margin_px;
    let lo_ok = |p: f64| p > margin_px;

    let left = camera.normalize_box(&det.left);
    let right = camera.normalize_box(&det.right);
    let keypoint = det.keypoint.map(|k| camera.normalize_u(k.u));
    let mut meas = MeasurementSet::from_boxes(&left, &right, keypoint, det.alpha);

    let edge_checks: [(Measurement, bool); 6] = [
        (Measurement::LeftU, lo_ok(det.left.u_min)),
        (Measurement::TopV, lo_ok(det.left.v_min)),
        (Measurement::RightU, det.left.u_max < max_u),
        (Measurement::BottomV, det.left.v_max < max_v),
        (Measurement::StereoLeftU, lo_ok(det.right.u_min)),
        (Measurement::StereoRightU, det.right.u_max < max_u),
    ];
    for (m, ok) in edge_checks {
        if !ok {
            meas.invalidate(m);
        }
    }
    let valid = meas.valid_count();
    if valid < 4 {
        return Err(Error::TooFewMeasurements { valid });
    }
    Ok(meas)
}

/// Damped Gauss-Newton settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Converged when the parameter step norm falls below this, scaled by `1 + |state|`.
    pub step_tolerance: f64,
    /// Converged when the residual norm falls below this.
    pub residual_tolerance: f64,
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Consecutive rejected steps before giving up.
    pub max_rejections: usize,
    /// Weight of the viewpoint residual, normalized-coordinate units per radian.
    pub viewpoint_weight: f64,
    /// Floor on the normalized disparity used for depth initialisation.
    pub min_disparity: f64,
    /// Re-solves allowed after the correspondence changes at the solution.
    pub max_resolves: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            step_tolerance: 1e-8,
            residual_tolerance: 1e-10,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            max_rejections: 5,
            viewpoint_weight: 1.0,
            min_disparity: 1e-6,
            max_resolves: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub solution: Box3D,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub used_viewpoint_constraint: bool,
    pub correspondence: Correspondence,
}

/// Solves with the default [`SolverConfig`].
pub fn solve_coarse(
    meas: &MeasurementSet,
    dims: Dimensions,
    camera: &StereoCamera,
    fixed_depth: Option<f64>,
) -> Result<SolverReport> {
    solve_coarse_with(meas, dims, camera, fixed_depth, &SolverConfig::default())
}

pub fn solve_coarse_with(
    meas: &MeasurementSet,
    dims: Dimensions,
    camera: &StereoCamera,
    fixed_depth: Option<f64>,
    config: &SolverConfig,
) -> Result<SolverReport> {
    meas.validate()?;
    Dimensions::new(dims.w, dims.l, dims.h)?;
    if let Some(z) = fixed_depth {
        if !(z > 0.0) {
            return Err(Error::NonPositiveDepth(z));
        }
    }
    let init = initial_state(meas, dims, camera, fixed_depth, config)?;
    let mut correspondence = Correspondence::for_box(camera, &init);
    let mut report = solve_with_correspondence(meas, camera, init, &correspondence, fixed_depth, config)?;
    let mut total_iterations = report.iterations;
    for _ in 0..config.max_resolves {
        let updated = Correspondence::for_box(camera, &report.solution);
        if updated == correspondence {
            break;
        }
        correspondence = updated;
        report = solve_with_correspondence(
            meas,
            camera,
            report.solution,
            &correspondence,
            fixed_depth,
            config,
        )?;
        total_iterations += report.iterations;
    }
    report.iterations = total_iterations;
    Ok(report)
}

/// Closed-form start: depth from the box-center disparity, position from the
/// left-box center ray, heading from the viewpoint.
fn initial_state(
    meas: &MeasurementSet,
    dims: Dimensions,
    camera: &StereoCamera,
    fixed_depth: Option<f64>,
    config: &SolverConfig,
) -> Result<Box3D> {
    use Measurement::*;
    let mean = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Some(0.5 * (a + b)),
        (Some(a), None) | (None, Some(a)) => Some(a),
        (None, None) => None,
    };
    let pairs = [
        (meas.get(LeftU), meas.get(StereoLeftU)),
        (meas.get(RightU), meas.get(StereoRightU)),
    ];
    let disparity = match pairs {
        [(Some(a), Some(b)), (Some(c), Some(d))] => Some(0.5 * (a + c) - 0.5 * (b + d)),
        [(Some(a), Some(b)), _] | [_, (Some(a), Some(b))] => Some(a - b),
        _ => None,
    };

    let z0 = match (fixed_depth, disparity) {
        (Some(z), _) => z,
        (None, Some(d)) => camera.baseline / d.max(config.min_disparity),
        (None, None) => match (meas.get(TopV), meas.get(BottomV)) {
            (Some(t), Some(b)) if b > t => dims.h / (b - t),
            _ => return Err(Error::UnobservableDepth),
        },
    };
    let u_center = mean(meas.get(LeftU), meas.get(RightU))
        .or_else(|| {
            mean(meas.get(StereoLeftU), meas.get(StereoRightU)).map(|u| u + camera.baseline / z0)
        })
        .ok_or(Error::UnobservableDepth)?;
    let v_center = mean(meas.get(TopV), meas.get(BottomV)).unwrap_or(0.0);
    let x0 = u_center * z0;
    let y0 = v_center * z0;
    let theta0 = meas.alpha.heading_at(x0, z0);
    Ok(Box3D {
        x: x0,
        y: y0,
        z: z0,
        theta: theta0,
        w: dims.w,
        l: dims.l,
        h: dims.h,
    })
}

/// Residual vector and Jacobian rows `d h / d (x, y, z, theta)`.
struct Linearization {
    residuals: Vec<f64>,
    jacobian: Vec<[f64; 4]>,
}

impl Linearization {
    fn cost(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Model prediction and gradient of one measurement for a given corner.
pub fn predict_measurement(
    camera: &StereoCamera,
    b: &Box3D,
    m: Measurement,
    corner: usize,
) -> (f64, [f64; 4]) {
    let (dx, dy, dz) = b.corner_offset(corner);
    let (ex, ez) = b.rotate(dx, dz);
    let eye = if m.in_right_eye() { camera.baseline } else { 0.0 };
    let depth = b.z + ez;
    let inv = 1.0 / depth;
    // d(ex)/d(theta) = ez, d(ez)/d(theta) = -ex
    if m.is_vertical() {
        let y = b.y + dy;
        let v = y * inv;
        (v, [0.0, inv, -v * inv, v * ex * inv])
    } else {
        let x = b.x - eye + ex;
        let u = x * inv;
        (u, [inv, 0.0, -u * inv, (ez + u * ex) * inv])
    }
}

/// Viewpoint residual `wrap(theta + arctan(-x/z) - alpha)` and its gradient.
pub fn viewpoint_residual(b: &Box3D, alpha: Viewpoint) -> (f64, [f64; 4]) {
    let r2 = b.x * b.x + b.z * b.z;
    let value = wrap_angle(b.theta + Viewpoint::azimuth(b.x, b.z) - alpha.alpha);
    (value, [-b.z / r2, 0.0, b.x / r2, 1.0])
}

fn linearize(
    meas: &MeasurementSet,
    camera: &StereoCamera,
    b: &Box3D,
    corr: &Correspondence,
    use_viewpoint: bool,
    weight: f64,
) -> Linearization {
    let mut lin = Linearization {
        residuals: Vec::with_capacity(8),
        jacobian: Vec::with_capacity(8),
    };
    for m in Measurement::ALL {
        let (Some(z), Some(corner)) = (meas.get(m), corr.corner(m)) else {
            continue;
        };
        let (pred, grad) = predict_measurement(camera, b, m, corner);
        lin.residuals.push(pred - z);
        lin.jacobian.push(grad);
    }
    if use_viewpoint {
        let (r, g) = viewpoint_residual(b, meas.alpha);
        lin.residuals.push(weight * r);
        lin.jacobian.push(g.map(|v| weight * v));
    }
    lin
}

fn solve_with_correspondence(
    meas: &MeasurementSet,
    camera: &StereoCamera,
    start: Box3D,
    corr: &Correspondence,
    fixed_depth: Option<f64>,
    config: &SolverConfig,
) -> Result<SolverReport> {
    let keypoint_usable =
        meas.get(Measurement::KeypointU).is_some() && corr.corner(Measurement::KeypointU).is_some();
    let use_viewpoint = !keypoint_usable;
    let active = [true, true, fixed_depth.is_none(), true];

    let mut state = start;
    if let Some(z) = fixed_depth {
        state.z = z;
    }
    let mut lin = linearize(meas, camera, &state, corr, use_viewpoint, config.viewpoint_weight);
    let mut cost = lin.cost();
    let mut damping = config.initial_damping;
    let mut rejections = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        if cost.sqrt() < config.residual_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut normal = Matrix4::<f64>::zeros();
        let mut gradient = Vector4::<f64>::zeros();
        for (row, r) in lin.jacobian.iter().zip(&lin.residuals) {
            let j = Vector4::from_fn(|i, _| if active[i] { row[i] } else { 0.0 });
            normal += j * j.transpose();
            gradient += j * *r;
        }
        let max_diag = (0..4).map(|i| normal[(i, i)]).fold(0.0, f64::max);
        for i in 0..4 {
            if !active[i] {
                normal[(i, i)] = 1.0;
            } else if !(normal[(i, i)] > 1e-14 * max_diag) {
                return Err(Error::SingularNormalEquations);
            }
        }
        let mut damped = normal;
        for i in 0..4 {
            if active[i] {
                damped[(i, i)] *= 1.0 + damping;
            }
        }
        let step = damped
            .cholesky()
            .ok_or(Error::SingularNormalEquations)?
            .solve(&(-gradient));
        let scale = 1.0 + Vector4::new(state.x, state.y, state.z, state.theta).norm();
        if step.norm() < config.step_tolerance * scale {
            converged = true;
            break;
        }

        let candidate = Box3D {
            x: state.x + step[0],
            y: state.y + step[1],
            z: state.z + step[2],
            theta: wrap_angle(state.theta + step[3]),
            ..state
        };
        let mut stalled = false;
        let accepted = candidate.z > 0.0 && {
            let cand_lin = linearize(meas, camera, &candidate, corr, use_viewpoint, config.viewpoint_weight);
            let cand_cost = cand_lin.cost();
            // At the minimum rounding noise can reject every tiny step.
            stalled = (cand_cost - cost).abs() <= 1e-12 * cost;
            if cand_cost < cost {
                state = candidate;
                lin = cand_lin;
                cost = cand_cost;
                true
            } else {
                false
            }
        };
        if accepted {
            damping /= config.damping_factor;
            rejections = 0;
        } else if stalled {
            converged = true;
            break;
        } else {
            damping *= config.damping_factor;
            rejections += 1;
            if rejections >= config.max_rejections {
                return Err(Error::DivergedSolve(rejections));
            }
        }
    }

    Ok(SolverReport {
        solution: state,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        used_viewpoint_constraint: use_viewpoint,
        correspondence: *corr,
    })
}

/// Normalized measurements and viewpoint of a detection's pixel boxes, without
/// truncation handling. Convenience for tests and synthetic pipelines.
pub fn measurements_from_pixels(
    camera: &StereoCamera,
    left: &Box2D,
    right: &Box2D,
    keypoint_px: Option<f64>,
    alpha: Viewpoint,
) -> MeasurementSet {
    MeasurementSet::from_boxes(
        &camera.normalize_box(left),
        &camera.normalize_box(right),
        keypoint_px.map(|u| camera.normalize_u(u)),
        alpha,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project_box3d, viewpoint_from_pose, PerspectiveKeypoint};
    use std::f64::consts::PI;

    fn camera() -> StereoCamera {
        StereoCamera::new(720.0, 720.0, 620.0, 180.0, 0.54, 1242, 375).unwrap()
    }

    fn exact_measurements(cam: &StereoCamera, b: &Box3D) -> MeasurementSet {
        let p = project_box3d(cam, b).unwrap();
        MeasurementSet::from_boxes(
            &p.left,
            &p.right,
            p.keypoint.map(|k| k.u),
            viewpoint_from_pose(b),
        )
    }

    fn truth() -> Box3D {
        Box3D::new(1.2, 0.6, 15.0, 0.5, Dimensions::new(1.6, 3.9, 1.5).unwrap()).unwrap()
    }

    #[test]
    fn rear_face_on_correspondence() {
        let c = infer_correspondence(Viewpoint::new(0.0));
        assert_eq!(c.corner(Measurement::LeftU), Some(0));
        assert_eq!(c.corner(Measurement::RightU), Some(1));
        assert_eq!(c.corner(Measurement::KeypointU), None);
    }

    #[test]
    fn corner_on_correspondence() {
        let c = infer_correspondence(Viewpoint::new(PI / 4.0));
        let kp = c.corner(Measurement::KeypointU).unwrap();
        assert_eq!(kp, 1);
        assert_eq!(c.corner(Measurement::LeftU), Some(0));
        assert_eq!(c.corner(Measurement::RightU), Some(2));
    }

    #[test]
    fn correspondence_wraps() {
        for a in [-3.0, -1.0, 0.2, 1.7, 3.1] {
            assert_eq!(
                infer_correspondence(Viewpoint::new(a)),
                infer_correspondence(Viewpoint::new(a + 2.0 * PI))
            );
        }
    }

    #[test]
    fn truncated_edge_dropped() {
        let cam = StereoCamera::new(720.0, 720.0, 620.0, 180.0, 0.54, 1242, 375).unwrap();
        let det = StereoDetection {
            left: Box2D::new(0.0, 150.0, 100.0, 200.0).unwrap(),
            right: Box2D::new(-10.0 + 10.5, 150.0, 90.0, 200.0).unwrap(),
            alpha: Viewpoint::new(0.3),
            keypoint: None,
            boundary: None,
            dims: Dimensions::new(1.6, 3.9, 1.5).unwrap(),
            score: 1.0,
        };
        let meas = extract_measurements(&cam, &det).unwrap();
        assert!(meas.get(Measurement::LeftU).is_none());
        assert!(meas.get(Measurement::StereoLeftU).is_none());
        assert!(meas.get(Measurement::RightU).is_some());
    }

    #[test]
    fn normalization_of_edges() {
        let cam = camera();
        let det = StereoDetection {
            left: Box2D::new(548.0, 150.0, 700.0, 200.0).unwrap(),
            right: Box2D::new(530.0, 150.0, 680.0, 200.0).unwrap(),
            alpha: Viewpoint::new(0.3),
            keypoint: Some(PerspectiveKeypoint { u: 600.0, corner: 1 }),
            boundary: None,
            dims: Dimensions::new(1.6, 3.9, 1.5).unwrap(),
            score: 1.0,
        };
        let meas = extract_measurements(&cam, &det).unwrap();
        assert!((meas.get(Measurement::LeftU).unwrap() + 0.1).abs() < 1e-15);
        assert!((meas.get(Measurement::KeypointU).unwrap() - (-20.0 / 720.0)).abs() < 1e-15);
        assert_eq!(meas.valid_count(), 7);
    }

    #[test]
    fn heavily_truncated_detection_rejected() {
        let cam = camera();
        let det = StereoDetection {
            left: Box2D::new(0.0, 0.0, 1241.0, 200.0).unwrap(),
            right: Box2D::new(500.0, 0.0, 700.0, 200.0).unwrap(),
            alpha: Viewpoint::new(0.0),
            keypoint: None,
            boundary: None,
            dims: Dimensions::new(1.6, 3.9, 1.5).unwrap(),
            score: 1.0,
        };
        assert_eq!(
            extract_measurements(&cam, &det),
            Err(Error::TooFewMeasurements { valid: 3 })
        );
    }

    #[test]
    fn recovers_noiseless_pose() {
        let cam = camera();
        let b = truth();
        let meas = exact_measurements(&cam, &b);
        assert_eq!(meas.valid_count(), 7);
        let rep = solve_coarse(&meas, b.dims(), &cam, None).unwrap();
        assert!(rep.converged);
        assert!(!rep.used_viewpoint_constraint);
        let s = rep.solution;
        assert!((s.x - b.x).abs() < 1e-6, "{s:?}");
        assert!((s.y - b.y).abs() < 1e-6);
        assert!((s.z - b.z).abs() < 1e-6);
        assert!(wrap_angle(s.theta - b.theta).abs() < 1e-6);
    }

    #[test]
    fn recovers_heading_from_viewpoint_without_keypoint() {
        let cam = camera();
        let b = truth();
        let mut meas = exact_measurements(&cam, &b);
        meas.invalidate(Measurement::KeypointU);
        let rep = solve_coarse(&meas, b.dims(), &cam, None).unwrap();
        assert!(rep.used_viewpoint_constraint);
        assert!(wrap_angle(rep.solution.theta - b.theta).abs() < 1e-6);
        assert!((rep.solution.z - b.z).abs() < 1e-6);
    }

    #[test]
    fn fixed_depth_is_frozen() {
        let cam = camera();
        let b = truth();
        let meas = exact_measurements(&cam, &b);
        let rep = solve_coarse(&meas, b.dims(), &cam, Some(b.z)).unwrap();
        assert_eq!(rep.solution.z, b.z);
        assert!((rep.solution.x - b.x).abs() < 1e-6);
        let off = solve_coarse(&meas, b.dims(), &cam, Some(b.z + 0.7)).unwrap();
        assert_eq!(off.solution.z, b.z + 0.7);
    }

    #[test]
    fn too_few_measurements() {
        let cam = camera();
        let mut meas = exact_measurements(&cam, &truth());
        for m in [Measurement::LeftU, Measurement::TopV, Measurement::RightU, Measurement::KeypointU] {
            meas.invalidate(m);
        }
        assert!(matches!(
            solve_coarse(&meas, truth().dims(), &cam, None),
            Err(Error::TooFewMeasurements { valid: 3 })
        ));
    }

    #[test]
    fn missing_vertical_edges_is_singular() {
        let cam = camera();
        let mut meas = exact_measurements(&cam, &truth());
        meas.invalidate(Measurement::TopV);
        meas.invalidate(Measurement::BottomV);
        assert_eq!(
            solve_coarse(&meas, truth().dims(), &cam, None).unwrap_err(),
            Error::SingularNormalEquations
        );
    }
}
