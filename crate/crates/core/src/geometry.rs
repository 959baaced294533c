//! Camera model, cuboid geometry and forward projection.
//!
//! Frames follow the KITTI camera convention: x right, y down, z forward,
//! origin at the left camera center. The right camera sits at `(baseline, 0, 0)`.
//! A [`Box3D`] stores its *center* (not the bottom-face center used by KITTI
//! label files) and a heading `theta` about the vertical axis. An object-frame
//! offset `(dx, dz)` (width, length) maps to the camera frame as
//!
//! ```text
//! x' = x + dx cos(theta) + dz sin(theta)
//! z' = z - dx sin(theta) + dz cos(theta)
//! ```
//!
//! Image measurements are kept in normalized coordinates
//! (`(pixel - principal) / focal`) unless a type says otherwise.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default strict-interior margin for the perspective keypoint, normalized units.
pub const KEYPOINT_MARGIN: f64 = 1e-6;

/// Object-frame `(width sign, length sign)` of the four bottom corners, in
/// cyclic order. Corner `k + 4` is the top corner above corner `k`.
pub const CORNER_SIGNS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.sin().atan2(angle.cos());
    if wrapped <= -PI {
        PI
    } else {
        wrapped
    }
}

/// Which camera of the rectified pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Eye {
    Left,
    Right,
}

/// Rectified pinhole stereo pair sharing intrinsics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoCamera {
    pub focal_u: f64,
    pub focal_v: f64,
    pub principal_u: f64,
    pub principal_v: f64,
    /// Distance between the optical centers, meters.
    pub baseline: f64,
    pub image_width: u32,
    pub image_height: u32,
}

impl StereoCamera {
    pub fn new(
        focal_u: f64,
        focal_v: f64,
        principal_u: f64,
        principal_v: f64,
        baseline: f64,
        image_width: u32,
        image_height: u32,
    ) -> Result<Self> {
        let camera = Self {
            focal_u,
            focal_v,
            principal_u,
            principal_v,
            baseline,
            image_width,
            image_height,
        };
        camera.validate()?;
        Ok(camera)
    }

    /// The KITTI object benchmark camera (sequence-average P2/P3).
    pub fn kitti() -> Self {
        Self {
            focal_u: 721.5377,
            focal_v: 721.5377,
            principal_u: 609.5593,
            principal_v: 172.854,
            baseline: 0.5327,
            image_width: 1242,
            image_height: 375,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_u > 0.0 && self.focal_v > 0.0) {
            return Err(Error::InvalidCamera("focal lengths must be positive"));
        }
        if !(self.baseline > 0.0) {
            return Err(Error::InvalidCamera("baseline must be positive"));
        }
        let inside_u = self.principal_u > 0.0 && self.principal_u < f64::from(self.image_width);
        let inside_v = self.principal_v > 0.0 && self.principal_v < f64::from(self.image_height);
        if !(inside_u && inside_v) {
            return Err(Error::InvalidCamera("principal point outside the image"));
        }
        Ok(())
    }

    /// Horizontal position of the given camera center.
    pub fn eye_offset(&self, eye: Eye) -> f64 {
        match eye {
            Eye::Left => 0.0,
            Eye::Right => self.baseline,
        }
    }

    pub fn normalize_u(&self, pixel_u: f64) -> f64 {
        (pixel_u - self.principal_u) / self.focal_u
    }

    pub fn normalize_v(&self, pixel_v: f64) -> f64 {
        (pixel_v - self.principal_v) / self.focal_v
    }

    pub fn pixel_u(&self, u: f64) -> f64 {
        u * self.focal_u + self.principal_u
    }

    pub fn pixel_v(&self, v: f64) -> f64 {
        v * self.focal_v + self.principal_v
    }

    pub fn normalize_box(&self, b: &Box2D) -> NormalizedBox2D {
        NormalizedBox2D {
            u_l: self.normalize_u(b.u_min),
            v_t: self.normalize_v(b.v_min),
            u_r: self.normalize_u(b.u_max),
            v_b: self.normalize_v(b.v_max),
        }
    }

    pub fn pixel_box(&self, b: &NormalizedBox2D) -> Box2D {
        Box2D {
            u_min: self.pixel_u(b.u_l),
            v_min: self.pixel_v(b.v_t),
            u_max: self.pixel_u(b.u_r),
            v_max: self.pixel_v(b.v_b),
        }
    }

    /// Disparity in pixels of a point at depth `z`.
    pub fn disparity_px(&self, z: f64) -> f64 {
        self.focal_u * self.baseline / z
    }

    /// Viewing ray through a pixel, scaled so that its z component is 1.
    /// A point `origin + t * ray` therefore has depth `t`.
    pub fn pixel_ray(&self, pixel_u: f64, pixel_v: f64) -> Vector3<f64> {
        Vector3::new(self.normalize_u(pixel_u), self.normalize_v(pixel_v), 1.0)
    }

    pub fn center(&self, eye: Eye) -> Point3<f64> {
        Point3::new(self.eye_offset(eye), 0.0, 0.0)
    }
}

/// Axis-aligned image box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl Box2D {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Result<Self> {
        let b = Self {
            u_min,
            v_min,
            u_max,
            v_max,
        };
        if !b.is_valid() {
            return Err(Error::InvalidBox("2D box needs u_min < u_max and v_min < v_max"));
        }
        Ok(b)
    }

    pub fn is_valid(&self) -> bool {
        self.u_min < self.u_max && self.v_min < self.v_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.u_min + self.u_max),
            0.5 * (self.v_min + self.v_max),
        )
    }

    pub fn from_center(cu: f64, cv: f64, width: f64, height: f64) -> Self {
        Self {
            u_min: cu - 0.5 * width,
            v_min: cv - 0.5 * height,
            u_max: cu + 0.5 * width,
            v_max: cv + 0.5 * height,
        }
    }

    /// Componentwise hull of two boxes.
    pub fn hull(&self, other: &Box2D) -> Box2D {
        Box2D {
            u_min: self.u_min.min(other.u_min),
            v_min: self.v_min.min(other.v_min),
            u_max: self.u_max.max(other.u_max),
            v_max: self.v_max.max(other.v_max),
        }
    }

    pub fn intersection_area(&self, other: &Box2D) -> f64 {
        let w = self.u_max.min(other.u_max) - self.u_min.max(other.u_min);
        let h = self.v_max.min(other.v_max) - self.v_min.max(other.v_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn translate(&self, du: f64, dv: f64) -> Box2D {
        Box2D {
            u_min: self.u_min + du,
            v_min: self.v_min + dv,
            u_max: self.u_max + du,
            v_max: self.v_max + dv,
        }
    }

    /// Clips the box to `[0, width - 1] x [0, height - 1]`.
    pub fn clip(&self, width: u32, height: u32) -> Box2D {
        let umax = f64::from(width) - 1.0;
        let vmax = f64::from(height) - 1.0;
        Box2D {
            u_min: self.u_min.clamp(0.0, umax),
            v_min: self.v_min.clamp(0.0, vmax),
            u_max: self.u_max.clamp(0.0, umax),
            v_max: self.v_max.clamp(0.0, vmax),
        }
    }
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBox2D {
    pub u_l: f64,
    pub v_t: f64,
    pub u_r: f64,
    pub v_b: f64,
}

impl NormalizedBox2D {
    fn empty() -> Self {
        Self {
            u_l: f64::INFINITY,
            v_t: f64::INFINITY,
            u_r: f64::NEG_INFINITY,
            v_b: f64::NEG_INFINITY,
        }
    }

    fn extend(&mut self, u: f64, v: f64) {
        self.u_l = self.u_l.min(u);
        self.u_r = self.u_r.max(u);
        self.v_t = self.v_t.min(v);
        self.v_b = self.v_b.max(v);
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_l && u <= self.u_r && v >= self.v_t && v <= self.v_b
    }
}

/// Object size in meters: width across the heading, length along it, height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dimensions {
    pub w: f64,
    pub l: f64,
    pub h: f64,
}

impl Dimensions {
    pub fn new(w: f64, l: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && l > 0.0 && h > 0.0) {
            return Err(Error::NonPositiveDimension);
        }
        Ok(Self { w, l, h })
    }
}

/// Oriented cuboid: center in the left camera frame, heading about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub theta: f64,
    pub w: f64,
    pub l: f64,
    pub h: f64,
}

/// Entry point of a ray into a cuboid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter at entry.
    pub t: f64,
    pub point: Point3<f64>,
    /// Entered face: object axis (0 = width, 1 = height, 2 = length) and side (+1/-1).
    pub face: (usize, i8),
}

impl Box3D {
    pub fn new(x: f64, y: f64, z: f64, theta: f64, dims: Dimensions) -> Result<Self> {
        let b = Self {
            x,
            y,
            z,
            theta: wrap_angle(theta),
            w: dims.w,
            l: dims.l,
            h: dims.h,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.l > 0.0 && self.h > 0.0) {
            return Err(Error::NonPositiveDimension);
        }
        if !(self.z > 0.0) {
            return Err(Error::NonPositiveDepth(self.z));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dimensions {
        Dimensions {
            w: self.w,
            l: self.l,
            h: self.h,
        }
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn volume(&self) -> f64 {
        self.w * self.l * self.h
    }

    /// Rotates an object-frame horizontal offset into the camera frame.
    #[inline]
    pub fn rotate(&self, dx: f64, dz: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (dx * c + dz * s, -dx * s + dz * c)
    }

    /// Inverse of [`Box3D::rotate`].
    #[inline]
    pub fn unrotate(&self, ex: f64, ez: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (ex * c - ez * s, ex * s + ez * c)
    }

    /// Object-frame `(dx, dy, dz)` offset of corner `k` (0..8).
    pub fn corner_offset(&self, k: usize) -> (f64, f64, f64) {
        let (sx, sz) = CORNER_SIGNS[k % 4];
        let sy = if k < 4 { 1.0 } else { -1.0 };
        (sx * self.w / 2.0, sy * self.h / 2.0, sz * self.l / 2.0)
    }

    pub fn corner(&self, k: usize) -> Point3<f64> {
        let (dx, dy, dz) = self.corner_offset(k);
        let (ex, ez) = self.rotate(dx, dz);
        Point3::new(self.x + ex, self.y + dy, self.z + ez)
    }

    /// The four bottom corners (y = center + h/2) in [`CORNER_SIGNS`] order:
    /// `(-w/2, -l/2)`, `(+w/2, -l/2)`, `(+w/2, +l/2)`, `(-w/2, +l/2)`.
    pub fn bottom_corners(&self) -> [Point3<f64>; 4] {
        [self.corner(0), self.corner(1), self.corner(2), self.corner(3)]
    }

    /// Bottom corners followed by the top corners above them.
    pub fn corners(&self) -> [Point3<f64>; 8] {
        std::array::from_fn(|k| self.corner(k))
    }

    /// Footprint in the x-z plane as `(x, z)` pairs, counter-clockwise seen from above.
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let c = self.bottom_corners();
        let pts = [(c[0].x, c[0].z), (c[1].x, c[1].z), (c[2].x, c[2].z), (c[3].x, c[3].z)];
        // Orientation of CORNER_SIGNS order flips with handedness of (x, z);
        // normalize to positive signed area.
        let area2: f64 = (0..4)
            .map(|i| {
                let (a, b) = (pts[i], pts[(i + 1) % 4]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum();
        if area2 < 0.0 {
            [pts[3], pts[2], pts[1], pts[0]]
        } else {
            pts
        }
    }

    /// Horizontal position `(a, b)` of a camera center at `(eye_x, 0, 0)` in the
    /// object frame (a along width, b along length).
    pub fn camera_in_object_frame(&self, eye_x: f64) -> (f64, f64) {
        self.unrotate(eye_x - self.x, -self.z)
    }

    /// First intersection of the ray `origin + t * dir` (t > 0) with the cuboid,
    /// by the slab method in the object frame. Rays starting inside return `None`.
    pub fn ray_entry(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<RayHit> {
        let (ox, oz) = self.unrotate(origin.x - self.x, origin.z - self.z);
        let oy = origin.y - self.y;
        let (dx, dz) = self.unrotate(dir.x, dir.z);
        let o = [ox, oy, oz];
        let d = [dx, dir.y, dz];
        let half = [self.w / 2.0, self.h / 2.0, self.l / 2.0];

        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut face = (0usize, 0i8);
        for axis in 0..3 {
            if d[axis] == 0.0 {
                if o[axis] < -half[axis] || o[axis] > half[axis] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[axis];
            let mut t0 = (-half[axis] - o[axis]) * inv;
            let mut t1 = (half[axis] - o[axis]) * inv;
            // Entering through the -half plane when travelling in +axis direction.
            let mut side = -1i8;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
                side = 1;
            }
            if t0 > t_enter {
                t_enter = t0;
                face = (axis, side);
            }
            t_exit = t_exit.min(t1);
        }
        if t_enter > t_exit || t_enter <= 0.0 {
            return None;
        }
        Some(RayHit {
            t: t_enter,
            point: origin + dir * t_enter,
            face,
        })
    }
}

/// Viewpoint (observation) angle: heading relative to the viewing ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub alpha: f64,
}

impl Viewpoint {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha: wrap_angle(alpha),
        }
    }

    /// Azimuth term `arctan(-x / z)` of an object center.
    pub fn azimuth(x: f64, z: f64) -> f64 {
        (-x).atan2(z)
    }

    /// Heading of an object at `(x, z)` seen under this viewpoint.
    pub fn heading_at(&self, x: f64, z: f64) -> f64 {
        wrap_angle(self.alpha - Self::azimuth(x, z))
    }

    pub fn sin_cos(&self) -> (f64, f64) {
        self.alpha.sin_cos()
    }

    pub fn from_sin_cos(sin: f64, cos: f64) -> Self {
        Self::new(sin.atan2(cos))
    }
}

/// `alpha = wrap(theta + arctan(-x / z))`.
pub fn viewpoint_from_pose(b: &Box3D) -> Viewpoint {
    Viewpoint::new(b.theta + Viewpoint::azimuth(b.x, b.z))
}

/// Projects a camera-frame point into the given eye, in normalized coordinates.
pub fn project_point(camera: &StereoCamera, p: &Point3<f64>, eye: Eye) -> Result<(f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::NonPositiveDepth(p.z));
    }
    Ok(((p.x - camera.eye_offset(eye)) / p.z, p.y / p.z))
}

/// Perspective keypoint: the visible bottom corner projecting inside the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointProjection {
    /// Normalized u coordinate in the left image.
    pub u: f64,
    /// Bottom corner index (0..4).
    pub corner: usize,
}

/// Stereo projection of a cuboid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxProjection {
    pub left: NormalizedBox2D,
    pub right: NormalizedBox2D,
    pub keypoint: Option<KeypointProjection>,
}

/// Bottom corner facing a camera at `eye_x` when the camera sees two side
/// faces (outside both slabs of the footprint); `None` when it faces one side.
pub fn visible_corner(b: &Box3D, eye_x: f64) -> Option<usize> {
    let (a, bb) = b.camera_in_object_frame(eye_x);
    if a.abs() <= b.w / 2.0 || bb.abs() <= b.l / 2.0 {
        return None;
    }
    CORNER_SIGNS
        .iter()
        .position(|&(sx, sz)| sx == a.signum() && sz == bb.signum())
}

/// Projects all eight corners into both eyes and takes the hulls.
pub fn project_box3d(camera: &StereoCamera, b: &Box3D) -> Result<BoxProjection> {
    project_box3d_with_margin(camera, b, KEYPOINT_MARGIN)
}

/// [`project_box3d`] with an explicit strict-interior margin for the keypoint.
pub fn project_box3d_with_margin(
    camera: &StereoCamera,
    b: &Box3D,
    margin: f64,
) -> Result<BoxProjection> {
    let mut left = NormalizedBox2D::empty();
    let mut right = NormalizedBox2D::empty();
    for p in b.corners() {
        let (ul, vl) = project_point(camera, &p, Eye::Left)?;
        let (ur, vr) = project_point(camera, &p, Eye::Right)?;
        left.extend(ul, vl);
        right.extend(ur, vr);
    }
    let keypoint = visible_corner(b, 0.0).and_then(|k| {
        let p = b.corner(k);
        let u = p.x / p.z;
        (u > left.u_l + margin && u < left.u_r - margin)
            .then_some(KeypointProjection { u, corner: k })
    });
    Ok(BoxProjection {
        left,
        right,
        keypoint,
    })
}

/// Predicted perspective keypoint of a detection, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerspectiveKeypoint {
    pub u: f64,
    /// Which of the four bottom corners (0..4) projects there.
    pub corner: usize,
}

/// Associated stereo 2D detection with the regressed quantities the geometric
/// stages consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoDetection {
    pub left: Box2D,
    pub right: Box2D,
    pub alpha: Viewpoint,
    pub keypoint: Option<PerspectiveKeypoint>,
    /// Left/right boundary keypoints, pixel columns in the left image.
    pub boundary: Option<(f64, f64)>,
    pub dims: Dimensions,
    pub score: f64,
}

impl StereoDetection {
    /// Boundary keypoints, defaulting to the left box edges.
    pub fn boundary_or_box(&self) -> (f64, f64) {
        self.boundary.unwrap_or((self.left.u_min, self.left.u_max))
    }
}
