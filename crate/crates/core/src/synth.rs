//! Seeded synthetic scenes and a stereo renderer.
//!
//! Scenes place cars on a flat ground plane in front of the camera and report
//! the exact stereo detection of each one next to a noisy copy. The renderer
//! ray-casts textured cuboids into the right view with 2x2 supersampling; the
//! left view's object pixels are then resampled from the right view through
//! the exact disparity of the surface each left pixel sees, so the warp used
//! by dense alignment is photometrically exact at the true depth.

use std::fmt::Write as _;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{ImagePatch, Rgb};
use crate::codec::KEYPOINT_BINS;
use crate::error::{Error, Result};
use crate::eval::iou_bev;
use crate::geometry::{
    project_box3d, viewpoint_from_pose, Box2D, Box3D, Dimensions, PerspectiveKeypoint,
    StereoCamera, StereoDetection, Viewpoint,
};

/// Camera height above the ground, meters (KITTI rig).
pub const CAMERA_HEIGHT: f64 = 1.65;

/// Pixels kept clear of the image border when truncation is not allowed.
pub const IMAGE_MARGIN_PX: f64 = 3.0;

/// Random scene parameters. Noise magnitudes are standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub num_objects: usize,
    /// Center depth range, meters.
    pub depth_range: (f64, f64),
    /// Heading range, radians.
    pub orientation_range: (f64, f64),
    /// Mean `(w, l, h)`, meters.
    pub dimension_mean: (f64, f64, f64),
    pub dimension_std: (f64, f64, f64),
    /// Texture lattice cells per meter; 0 renders a uniform scene.
    pub texture_frequency: f64,
    /// Common horizontal shift of the right box, pixels.
    pub disparity_noise: f64,
    /// Independent noise on each box edge, pixels.
    pub edge_noise: f64,
    /// Noise on the viewpoint angle, radians.
    pub viewpoint_noise: f64,
    /// Noise on keypoint columns, in keypoint bins (box width / 28).
    pub keypoint_noise: f64,
    /// Let objects extend past the image border.
    pub allow_truncation: bool,
    /// Only accept objects whose perspective keypoint exists.
    pub require_keypoint: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            num_objects: 4,
            depth_range: (5.0, 50.0),
            orientation_range: (-std::f64::consts::PI, std::f64::consts::PI),
            dimension_mean: (1.6, 3.9, 1.56),
            dimension_std: (0.1, 0.4, 0.1),
            texture_frequency: 4.0,
            disparity_noise: 0.0,
            edge_noise: 0.0,
            viewpoint_noise: 0.0,
            keypoint_noise: 0.0,
            allow_truncation: false,
            require_keypoint: false,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let (z0, z1) = self.depth_range;
        if !(z0 > 0.0 && z1 >= z0) {
            return Err(Error::Config(format!("invalid depth range ({z0}, {z1})")));
        }
        if !(self.orientation_range.1 >= self.orientation_range.0) {
            return Err(Error::Config("invalid orientation range".into()));
        }
        let (w, l, h) = self.dimension_mean;
        if !(w > 0.0 && l > 0.0 && h > 0.0) {
            return Err(Error::NonPositiveDimension);
        }
        let (sw, sl, sh) = self.dimension_std;
        let noise = [
            sw,
            sl,
            sh,
            self.texture_frequency,
            self.disparity_noise,
            self.edge_noise,
            self.viewpoint_noise,
            self.keypoint_noise,
        ];
        if noise.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("noise levels and texture frequency must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticObject {
    pub truth: Box3D,
    pub exact: StereoDetection,
    pub noisy: StereoDetection,
    /// Seed of the object's surface texture.
    pub texture_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub spec: SceneSpec,
    pub camera: StereoCamera,
    pub objects: Vec<SyntheticObject>,
}

/// Noise-free detection of a cuboid: the projected boxes in pixels, the true
/// viewpoint, the perspective keypoint, and boundary keypoints at the left box
/// edges.
pub fn exact_detection(camera: &StereoCamera, b: &Box3D) -> Result<StereoDetection> {
    let p = project_box3d(camera, b)?;
    let left = camera.pixel_box(&p.left);
    Ok(StereoDetection {
        left,
        right: camera.pixel_box(&p.right),
        alpha: viewpoint_from_pose(b),
        keypoint: p.keypoint.map(|k| PerspectiveKeypoint {
            u: camera.pixel_u(k.u),
            corner: k.corner,
        }),
        boundary: Some((left.u_min, left.u_max)),
        dims: b.dims(),
        score: 1.0,
    })
}

fn inside_image(camera: &StereoCamera, b: &Box2D) -> bool {
    b.u_min >= IMAGE_MARGIN_PX
        && b.v_min >= IMAGE_MARGIN_PX
        && b.u_max <= f64::from(camera.image_width) - 1.0 - IMAGE_MARGIN_PX
        && b.v_max <= f64::from(camera.image_height) - 1.0 - IMAGE_MARGIN_PX
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Applies the spec's noise model. Every draw is taken regardless of the
/// magnitudes, so scenes with different noise levels share their geometry.
fn perturb(exact: &StereoDetection, spec: &SceneSpec, rng: &mut ChaCha8Rng) -> StereoDetection {
    let mut gauss = |sigma: f64| rng.sample(Normal::new(0.0, sigma).expect("sigma >= 0"));
    let e = spec.edge_noise;
    let (lu0, lu1) = sorted(exact.left.u_min + gauss(e), exact.left.u_max + gauss(e));
    let (v0, v1) = sorted(exact.left.v_min + gauss(e), exact.left.v_max + gauss(e));
    let (ru0, ru1) = sorted(exact.right.u_min + gauss(e), exact.right.u_max + gauss(e));
    let shift = gauss(spec.disparity_noise);
    let dalpha = gauss(spec.viewpoint_noise);
    let alpha = if dalpha == 0.0 {
        exact.alpha
    } else {
        Viewpoint::new(exact.alpha.alpha + dalpha)
    };
    let bin = exact.left.width() / KEYPOINT_BINS as f64;
    let kp_noise = gauss(spec.keypoint_noise * bin);
    let b0 = gauss(spec.keypoint_noise * bin);
    let b1 = gauss(spec.keypoint_noise * bin);
    StereoDetection {
        left: Box2D {
            u_min: lu0,
            v_min: v0,
            u_max: lu1,
            v_max: v1,
        },
        // rectified pair: the right box shares the left's vertical extent
        right: Box2D {
            u_min: ru0 + shift,
            v_min: v0,
            u_max: ru1 + shift,
            v_max: v1,
        },
        alpha,
        keypoint: exact.keypoint.map(|k| PerspectiveKeypoint {
            u: k.u + kp_noise,
            corner: k.corner,
        }),
        boundary: exact.boundary.map(|(a, b)| sorted(a + b0, b + b1)),
        dims: exact.dims,
        score: exact.score,
    }
}

const MAX_ATTEMPTS_PER_OBJECT: usize = 1000;

/// Samples a scene. Output is a pure function of `(spec, camera)`. Fewer than
/// `num_objects` objects are returned when placement keeps failing.
pub fn generate_scene(spec: &SceneSpec, camera: &StereoCamera) -> Result<Scene> {
    spec.validate()?;
    camera.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut objects: Vec<SyntheticObject> = Vec::with_capacity(spec.num_objects);
    let width = f64::from(camera.image_width);
    let mut attempts = 0;
    while objects.len() < spec.num_objects && attempts < MAX_ATTEMPTS_PER_OBJECT * spec.num_objects.max(1) {
        attempts += 1;
        let z = uniform(&mut rng, spec.depth_range);
        let theta = uniform(&mut rng, spec.orientation_range);
        let (mw, ml, mh) = spec.dimension_mean;
        let (sw, sl, sh) = spec.dimension_std;
        let mut dim = |mean: f64, std: f64| {
            let v = mean + rng.sample(Normal::new(0.0, std).expect("std >= 0"));
            v.max(0.5 * mean)
        };
        let dims = Dimensions::new(dim(mw, sw), dim(ml, sl), dim(mh, sh))?;
        let u_center = uniform(&mut rng, (IMAGE_MARGIN_PX, width - 1.0 - IMAGE_MARGIN_PX));
        let x = (u_center - camera.principal_u) * z / camera.focal_u;
        let y = CAMERA_HEIGHT - dims.h / 2.0;
        let texture_seed: u64 = rng.random();
        // drawn before any rejection so the stream does not depend on it
        let noise_rng_seed: u64 = rng.random();

        let truth = Box3D::new(x, y, z, theta, dims)?;
        if truth.corners().iter().any(|p| p.z < 0.5) {
            continue;
        }
        let exact = exact_detection(camera, &truth)?;
        if !spec.allow_truncation && !(inside_image(camera, &exact.left) && inside_image(camera, &exact.right)) {
            continue;
        }
        if spec.require_keypoint && exact.keypoint.is_none() {
            continue;
        }
        if objects.iter().any(|o| iou_bev(&o.truth, &truth) > 0.0) {
            continue;
        }
        let noisy = perturb(&exact, spec, &mut ChaCha8Rng::seed_from_u64(noise_rng_seed));
        objects.push(SyntheticObject {
            truth,
            exact,
            noisy,
            texture_seed,
        });
    }
    Ok(Scene {
        spec: spec.clone(),
        camera: *camera,
        objects,
    })
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

// ---------------------------------------------------------------------------
// Rendering

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Object texture lattice cells per meter; 0 renders everything flat.
    pub texture_frequency: f64,
    /// Background texture lattice cells per meter.
    pub background_frequency: f64,
    /// Depth of the fronto-parallel background plane, meters.
    pub background_depth: f64,
    /// Sub-samples per pixel side (2 gives 4 samples per pixel).
    pub supersample: usize,
    /// Extra pixels around the left box in rendered patches.
    pub patch_margin: i64,
    /// The right patch covers disparities of depths down to
    /// `nearest corner depth - depth_slack`.
    pub depth_slack: f64,
    pub ambient: f64,
    pub background_seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            texture_frequency: 4.0,
            background_frequency: 1.0,
            background_depth: 150.0,
            supersample: 2,
            patch_margin: 6,
            depth_slack: 4.0,
            ambient: 0.4,
            background_seed: 0x5eed,
        }
    }
}

impl RenderConfig {
    pub fn for_spec(spec: &SceneSpec) -> Self {
        Self {
            texture_frequency: spec.texture_frequency,
            background_frequency: spec.texture_frequency / 4.0,
            ..Self::default()
        }
    }
}

/// Rectangle of integer pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRegion {
    pub u0: i64,
    pub v0: i64,
    pub width: usize,
    pub height: usize,
}

impl PixelRegion {
    pub fn full(camera: &StereoCamera) -> Self {
        Self {
            u0: 0,
            v0: 0,
            width: camera.image_width as usize,
            height: camera.image_height as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPair {
    pub left: ImagePatch,
    pub right: ImagePatch,
    /// Disparity of the object surface seen through each left pixel center
    /// (row-major over the left patch); `None` on background.
    pub disparity: Vec<Option<f64>>,
}

impl RenderedPair {
    pub fn disparity_at(&self, u: i64, v: i64) -> Option<f64> {
        let (u0, v0) = self.left.origin();
        let (i, j) = (u - u0, v - v0);
        if i < 0 || j < 0 || i as usize >= self.left.width() || j as usize >= self.left.height() {
            return None;
        }
        self.disparity[j as usize * self.left.width() + i as usize]
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn lattice(seed: u64, i: i64, j: i64, channel: u64) -> f64 {
    let h = splitmix(seed ^ splitmix((i as u64).wrapping_mul(0x1f1f_1f1f) ^ splitmix((j as u64) ^ (channel << 56))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Value noise in `[0, 1]` per channel at `(s, t)` lattice coordinates.
fn value_noise(seed: u64, s: f64, t: f64) -> Rgb {
    let (i, j) = (s.floor(), t.floor());
    let (fs, ft) = (smoothstep(s - i), smoothstep(t - j));
    let (i, j) = (i as i64, j as i64);
    std::array::from_fn(|c| {
        let c = c as u64;
        let a = lattice(seed, i, j, c);
        let b = lattice(seed, i + 1, j, c);
        let d = lattice(seed, i, j + 1, c);
        let e = lattice(seed, i + 1, j + 1, c);
        let top = a + fs * (b - a);
        let bottom = d + fs * (e - d);
        top + ft * (bottom - top)
    })
}

const FLAT_COLOR: Rgb = [0.5, 0.5, 0.5];

fn light_direction() -> Vector3<f64> {
    // towards the light: up, left and back towards the camera
    Vector3::new(-0.3, -0.8, -0.5).normalize()
}

struct Surface<'a> {
    objects: &'a [(Box3D, u64)],
    config: &'a RenderConfig,
}

impl Surface<'_> {
    /// Nearest object hit along a ray.
    fn hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(usize, crate::geometry::RayHit)> {
        self.objects
            .iter()
            .enumerate()
            .filter_map(|(i, (b, _))| b.ray_entry(origin, dir).map(|h| (i, h)))
            .min_by(|a, b| a.1.t.total_cmp(&b.1.t))
    }

    fn object_color(&self, index: usize, hit: &crate::geometry::RayHit) -> Rgb {
        if self.config.texture_frequency == 0.0 {
            return FLAT_COLOR;
        }
        let (b, seed) = &self.objects[index];
        let (ex, ez) = b.unrotate(hit.point.x - b.x, hit.point.z - b.z);
        let ey = hit.point.y - b.y;
        let (axis, side) = hit.face;
        let (s, t) = match axis {
            0 => (ez, ey),
            1 => (ex, ez),
            _ => (ex, ey),
        };
        let f = self.config.texture_frequency;
        let face_seed = splitmix(*seed ^ ((axis as u64) << 8 | (side > 0) as u64));
        let tex = value_noise(face_seed, s * f, t * f);
        let normal = match axis {
            0 => {
                let (nx, nz) = b.rotate(f64::from(side), 0.0);
                Vector3::new(nx, 0.0, nz)
            }
            1 => Vector3::new(0.0, f64::from(side), 0.0),
            _ => {
                let (nx, nz) = b.rotate(0.0, f64::from(side));
                Vector3::new(nx, 0.0, nz)
            }
        };
        let a = self.config.ambient;
        let shade = a + (1.0 - a) * normal.dot(&light_direction()).max(0.0);
        tex.map(|v| shade * (0.1 + 0.8 * v))
    }

    fn background_color(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Rgb {
        if self.config.texture_frequency == 0.0 {
            return FLAT_COLOR;
        }
        let t = (self.config.background_depth - origin.z) / dir.z;
        let p = origin + dir * t;
        let f = self.config.background_frequency;
        value_noise(self.config.background_seed, p.x * f, p.y * f).map(|v| 0.15 + 0.7 * v)
    }

    fn sample(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Rgb {
        match self.hit(origin, dir) {
            Some((i, h)) => self.object_color(i, &h),
            None => self.background_color(origin, dir),
        }
    }

    /// Box-filtered supersampled color of pixel `(u, v)` seen from `origin`.
    fn pixel(&self, camera: &StereoCamera, origin: &Point3<f64>, u: f64, v: f64) -> Rgb {
        let n = self.config.supersample.max(1);
        let mut acc = [0.0; 3];
        for a in 0..n {
            for b in 0..n {
                let du = (a as f64 + 0.5) / n as f64 - 0.5;
                let dv = (b as f64 + 0.5) / n as f64 - 0.5;
                let c = self.sample(origin, &camera.pixel_ray(u + du, v + dv));
                for k in 0..3 {
                    acc[k] += c[k];
                }
            }
        }
        acc.map(|c| c / (n * n) as f64)
    }
}

/// Renders several cuboids (each with its texture seed) into a left and a
/// right region.
pub fn render_regions(
    camera: &StereoCamera,
    objects: &[(Box3D, u64)],
    left_region: PixelRegion,
    right_region: PixelRegion,
    config: &RenderConfig,
) -> Result<RenderedPair> {
    camera.validate()?;
    for (b, _) in objects {
        b.validate()?;
    }
    let surface = Surface { objects, config };
    let right_origin = camera.center(crate::geometry::Eye::Right);
    let right_data: Vec<Rgb> = (0..right_region.width * right_region.height)
        .into_par_iter()
        .map(|idx| {
            let u = (right_region.u0 + (idx % right_region.width) as i64) as f64;
            let v = (right_region.v0 + (idx / right_region.width) as i64) as f64;
            surface.pixel(camera, &right_origin, u, v)
        })
        .collect();
    let right = ImagePatch::new(
        right_region.width,
        right_region.height,
        (right_region.u0, right_region.v0),
        right_data,
    )?;

    let fb = camera.focal_u * camera.baseline;
    let left_origin = Point3::origin();
    let left_pixels: Vec<(Rgb, Option<f64>)> = (0..left_region.width * left_region.height)
        .into_par_iter()
        .map(|idx| {
            let u = (left_region.u0 + (idx % left_region.width) as i64) as f64;
            let v = (left_region.v0 + (idx / left_region.width) as i64) as f64;
            match surface.hit(&left_origin, &camera.pixel_ray(u, v)) {
                Some((_, h)) => {
                    let d = fb / h.t;
                    let color = right
                        .bilinear(u - d, v)
                        .unwrap_or_else(|| surface.pixel(camera, &left_origin, u, v));
                    (color, Some(d))
                }
                None => (surface.pixel(camera, &left_origin, u, v), None),
            }
        })
        .collect();
    let (left_data, disparity): (Vec<Rgb>, Vec<Option<f64>>) = left_pixels.into_iter().unzip();
    let left = ImagePatch::new(
        left_region.width,
        left_region.height,
        (left_region.u0, left_region.v0),
        left_data,
    )?;
    Ok(RenderedPair {
        left,
        right,
        disparity,
    })
}

/// Patch regions around one object: the left box plus a margin, and the
/// right span reachable by disparities between the background plane and
/// `depth_slack` in front of the nearest corner.
pub fn patch_regions(camera: &StereoCamera, b: &Box3D, config: &RenderConfig) -> Result<(PixelRegion, PixelRegion)> {
    let det = exact_detection(camera, b)?;
    let m = config.patch_margin;
    let u0 = det.left.u_min.floor() as i64 - m;
    let u1 = det.left.u_max.ceil() as i64 + m;
    let v0 = det.left.v_min.floor() as i64 - m;
    let v1 = det.left.v_max.ceil() as i64 + m;
    let fb = camera.focal_u * camera.baseline;
    let near = b
        .corners()
        .iter()
        .map(|p| p.z)
        .fold(f64::INFINITY, f64::min);
    let d_max = fb / (near - config.depth_slack).max(0.5);
    let d_min = fb / config.background_depth;
    let r0 = u0 - d_max.ceil() as i64 - m;
    let r1 = u1 - d_min.floor() as i64 + m;
    let height = (v1 - v0 + 1) as usize;
    Ok((
        PixelRegion {
            u0,
            v0,
            width: (u1 - u0 + 1) as usize,
            height,
        },
        PixelRegion {
            u0: r0,
            v0,
            width: (r1 - r0 + 1) as usize,
            height,
        },
    ))
}

/// Renders one object's left patch and the matching right patch.
pub fn render_stereo(
    object: &SyntheticObject,
    camera: &StereoCamera,
    texture_seed: u64,
    config: &RenderConfig,
) -> Result<RenderedPair> {
    let (left, right) = patch_regions(camera, &object.truth, config)?;
    render_regions(camera, &[(object.truth, texture_seed)], left, right, config)
}

/// Renders the full left and right images of a scene.
pub fn render_frame(scene: &Scene, config: &RenderConfig) -> Result<RenderedPair> {
    let objects: Vec<(Box3D, u64)> = scene
        .objects
        .iter()
        .map(|o| (o.truth, o.texture_seed))
        .collect();
    let full = PixelRegion::full(&scene.camera);
    render_regions(&scene.camera, &objects, full, full, config)
}

// ---------------------------------------------------------------------------
// Text serialization
//
//   stereobox-scene 1
//   spec <key> <value...>                 one line per SceneSpec field
//   camera <fu> <fv> <cu> <cv> <b> <W> <H>
//   object <texture_seed> <x> <y> <z> <theta> <w> <l> <h>
//   exact <detection>
//   noisy <detection>
//
// where <detection> is
//   L <u_min> <v_min> <u_max> <v_max> R <u_min> <v_min> <u_max> <v_max>
//   A <alpha> K <u> <corner> | K - B <left> <right> | B - S <score>
// Numbers are written in Rust's shortest round-trip form.

const SCENE_MAGIC: &str = "stereobox-scene 1";

fn write_detection(out: &mut String, tag: &str, d: &StereoDetection) {
    let _ = write!(
        out,
        "{tag} L {} {} {} {} R {} {} {} {} A {}",
        d.left.u_min, d.left.v_min, d.left.u_max, d.left.v_max, d.right.u_min, d.right.v_min, d.right.u_max, d.right.v_max, d.alpha.alpha
    );
    match d.keypoint {
        Some(k) => {
            let _ = write!(out, " K {} {}", k.u, k.corner);
        }
        None => out.push_str(" K -"),
    }
    match d.boundary {
        Some((a, b)) => {
            let _ = write!(out, " B {a} {b}");
        }
        None => out.push_str(" B -"),
    }
    let _ = writeln!(out, " S {}", d.score);
}

impl Scene {
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = String::new();
        let _ = writeln!(out, "{SCENE_MAGIC}");
        let _ = writeln!(out, "spec seed {}", s.seed);
        let _ = writeln!(out, "spec num_objects {}", s.num_objects);
        let _ = writeln!(out, "spec depth_range {} {}", s.depth_range.0, s.depth_range.1);
        let _ = writeln!(out, "spec orientation_range {} {}", s.orientation_range.0, s.orientation_range.1);
        let (a, b, c) = s.dimension_mean;
        let _ = writeln!(out, "spec dimension_mean {a} {b} {c}");
        let (a, b, c) = s.dimension_std;
        let _ = writeln!(out, "spec dimension_std {a} {b} {c}");
        let _ = writeln!(out, "spec texture_frequency {}", s.texture_frequency);
        let _ = writeln!(out, "spec disparity_noise {}", s.disparity_noise);
        let _ = writeln!(out, "spec edge_noise {}", s.edge_noise);
        let _ = writeln!(out, "spec viewpoint_noise {}", s.viewpoint_noise);
        let _ = writeln!(out, "spec keypoint_noise {}", s.keypoint_noise);
        let _ = writeln!(out, "spec allow_truncation {}", s.allow_truncation);
        let _ = writeln!(out, "spec require_keypoint {}", s.require_keypoint);
        let c = &self.camera;
        let _ = writeln!(
            out,
            "camera {} {} {} {} {} {} {}",
            c.focal_u, c.focal_v, c.principal_u, c.principal_v, c.baseline, c.image_width, c.image_height
        );
        for o in &self.objects {
            let t = &o.truth;
            let _ = writeln!(
                out,
                "object {} {} {} {} {} {} {} {}",
                o.texture_seed, t.x, t.y, t.z, t.theta, t.w, t.l, t.h
            );
            write_detection(&mut out, "exact", &o.exact);
            write_detection(&mut out, "noisy", &o.noisy);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Scene> {
        let mut spec = SceneSpec::default();
        let mut camera = None;
        let mut objects: Vec<SyntheticObject> = Vec::new();
        let mut pending: Option<(Box3D, u64, Option<StereoDetection>)> = None;
        let mut saw_magic = false;

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |reason: &str| Error::MalformedScene {
                line,
                reason: reason.to_string(),
            };
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            if tokens.is_empty() || tokens[0].starts_with('#') {
                continue;
            }
            if !saw_magic {
                if raw.trim() != SCENE_MAGIC {
                    return Err(err("missing scene header"));
                }
                saw_magic = true;
                continue;
            }
            let num = |k: usize| -> Result<f64> {
                tokens
                    .get(k)
                    .ok_or_else(|| err("missing value"))?
                    .parse::<f64>()
                    .map_err(|e| err(&e.to_string()))
            };
            match tokens[0] {
                "spec" => {
                    let key = *tokens.get(1).ok_or_else(|| err("missing spec key"))?;
                    let boolean = |k: usize| -> Result<bool> {
                        tokens
                            .get(k)
                            .ok_or_else(|| err("missing value"))?
                            .parse::<bool>()
                            .map_err(|e| err(&e.to_string()))
                    };
                    match key {
                        "seed" => {
                            spec.seed = tokens
                                .get(2)
                                .ok_or_else(|| err("missing value"))?
                                .parse()
                                .map_err(|_| err("bad seed"))?
                        }
                        "num_objects" => spec.num_objects = num(2)? as usize,
                        "depth_range" => spec.depth_range = (num(2)?, num(3)?),
                        "orientation_range" => spec.orientation_range = (num(2)?, num(3)?),
                        "dimension_mean" => spec.dimension_mean = (num(2)?, num(3)?, num(4)?),
                        "dimension_std" => spec.dimension_std = (num(2)?, num(3)?, num(4)?),
                        "texture_frequency" => spec.texture_frequency = num(2)?,
                        "disparity_noise" => spec.disparity_noise = num(2)?,
                        "edge_noise" => spec.edge_noise = num(2)?,
                        "viewpoint_noise" => spec.viewpoint_noise = num(2)?,
                        "keypoint_noise" => spec.keypoint_noise = num(2)?,
                        "allow_truncation" => spec.allow_truncation = boolean(2)?,
                        "require_keypoint" => spec.require_keypoint = boolean(2)?,
                        other => return Err(err(&format!("unknown spec key {other}"))),
                    }
                }
                "camera" => {
                    if tokens.len() != 8 {
                        return Err(err("camera needs 7 values"));
                    }
                    let int = |k: usize| tokens[k].parse::<u32>().map_err(|e| err(&e.to_string()));
                    camera = Some(
                        StereoCamera::new(num(1)?, num(2)?, num(3)?, num(4)?, num(5)?, int(6)?, int(7)?)
                            .map_err(|e| err(&e.to_string()))?,
                    );
                }
                "object" => {
                    if pending.is_some() {
                        return Err(err("previous object is incomplete"));
                    }
                    if tokens.len() != 9 {
                        return Err(err("object needs 8 values"));
                    }
                    let seed = tokens[1].parse::<u64>().map_err(|e| err(&e.to_string()))?;
                    let dims = Dimensions::new(num(6)?, num(7)?, num(8)?).map_err(|e| err(&e.to_string()))?;
                    // stored heading is already wrapped; rewrapping would perturb its bits
                    let b = Box3D {
                        x: num(2)?,
                        y: num(3)?,
                        z: num(4)?,
                        theta: num(5)?,
                        w: dims.w,
                        l: dims.l,
                        h: dims.h,
                    };
                    b.validate().map_err(|e| err(&e.to_string()))?;
                    pending = Some((b, seed, None));
                }
                "exact" | "noisy" => {
                    let (b, seed, exact) = pending.take().ok_or_else(|| err("detection without object"))?;
                    let det = parse_detection(&tokens[1..], b.dims()).map_err(|r| err(&r))?;
                    match (tokens[0], exact) {
                        ("exact", None) => pending = Some((b, seed, Some(det))),
                        ("noisy", Some(exact)) => objects.push(SyntheticObject {
                            truth: b,
                            exact,
                            noisy: det,
                            texture_seed: seed,
                        }),
                        _ => return Err(err("expected exact then noisy")),
                    }
                }
                other => return Err(err(&format!("unknown record {other}"))),
            }
        }
        if pending.is_some() {
            return Err(Error::MalformedScene {
                line: text.lines().count(),
                reason: "last object is incomplete".into(),
            });
        }
        let camera = camera.ok_or(Error::MalformedScene {
            line: text.lines().count(),
            reason: "missing camera".into(),
        })?;
        Ok(Scene { spec, camera, objects })
    }
}

fn parse_detection(tokens: &[&str], dims: Dimensions) -> std::result::Result<StereoDetection, String> {
    let mut rest = tokens;
    let mut take = |n: usize| -> std::result::Result<Vec<&str>, String> {
        if rest.len() < n {
            return Err("truncated detection".into());
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Ok(head.to_vec())
    };
    let f = |s: &str| s.parse::<f64>().map_err(|e| format!("{s}: {e}"));
    let tag = |t: &str, want: &str| {
        if t == want {
            Ok(())
        } else {
            Err(format!("expected {want}, found {t}"))
        }
    };

    let l = take(5)?;
    tag(l[0], "L")?;
    let r = take(5)?;
    tag(r[0], "R")?;
    let a = take(2)?;
    tag(a[0], "A")?;
    let k = take(2)?;
    tag(k[0], "K")?;
    let keypoint = if k[1] == "-" {
        None
    } else {
        let c = take(1)?;
        let corner = c[0].parse::<usize>().map_err(|e| e.to_string())?;
        if corner > 3 {
            return Err("keypoint corner out of range".into());
        }
        Some(PerspectiveKeypoint { u: f(k[1])?, corner })
    };
    let bt = take(2)?;
    tag(bt[0], "B")?;
    let boundary = if bt[1] == "-" {
        None
    } else {
        let b1 = take(1)?;
        Some((f(bt[1])?, f(b1[0])?))
    };
    let s = take(2)?;
    tag(s[0], "S")?;
    if !rest.is_empty() {
        return Err("trailing tokens".into());
    }
    let bx = |v: &[&str]| -> std::result::Result<Box2D, String> {
        Ok(Box2D {
            u_min: f(v[1])?,
            v_min: f(v[2])?,
            u_max: f(v[3])?,
            v_max: f(v[4])?,
        })
    };
    Ok(StereoDetection {
        left: bx(&l)?,
        right: bx(&r)?,
        alpha: Viewpoint { alpha: f(a[1])? },
        keypoint,
        boundary,
        dims,
        score: f(s[1])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{photometric_cost, pixel_depth_offsets, valid_roi};

    fn spec(seed: u64) -> SceneSpec {
        SceneSpec {
            seed,
            num_objects: 6,
            ..SceneSpec::default()
        }
    }

    #[test]
    fn seed_determinism() {
        let cam = StereoCamera::kitti();
        let a = generate_scene(&spec(7), &cam).unwrap();
        let b = generate_scene(&spec(7), &cam).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a.to_text(), generate_scene(&spec(8), &cam).unwrap().to_text());
    }

    #[test]
    fn zero_noise_is_exact() {
        let cam = StereoCamera::kitti();
        let scene = generate_scene(&spec(3), &cam).unwrap();
        assert!(!scene.objects.is_empty());
        for o in &scene.objects {
            assert_eq!(o.noisy, o.exact);
            let p = project_box3d(&cam, &o.truth).unwrap();
            assert_eq!(o.exact.left, cam.pixel_box(&p.left));
            assert_eq!(o.exact.right, cam.pixel_box(&p.right));
        }
    }

    #[test]
    fn objects_do_not_overlap_and_stay_inside() {
        let cam = StereoCamera::kitti();
        for seed in 0..20 {
            let scene = generate_scene(&spec(seed), &cam).unwrap();
            for (i, a) in scene.objects.iter().enumerate() {
                assert!(inside_image(&cam, &a.exact.left) && inside_image(&cam, &a.exact.right));
                for b in &scene.objects[i + 1..] {
                    assert_eq!(iou_bev(&a.truth, &b.truth), 0.0);
                }
            }
        }
    }

    #[test]
    fn noise_changes_only_detections() {
        let cam = StereoCamera::kitti();
        let clean = generate_scene(&spec(5), &cam).unwrap();
        let noisy = generate_scene(
            &SceneSpec {
                disparity_noise: 1.0,
                edge_noise: 0.5,
                ..spec(5)
            },
            &cam,
        )
        .unwrap();
        assert_eq!(clean.objects.len(), noisy.objects.len());
        for (c, n) in clean.objects.iter().zip(&noisy.objects) {
            assert_eq!(c.truth, n.truth);
            assert_ne!(c.noisy, n.noisy);
            assert_eq!(n.noisy.left.v_min, n.noisy.right.v_min);
        }
    }

    #[test]
    fn text_round_trip() {
        let cam = StereoCamera::kitti();
        let scene = generate_scene(
            &SceneSpec {
                edge_noise: 0.7,
                keypoint_noise: 1.0,
                viewpoint_noise: 0.1,
                ..spec(11)
            },
            &cam,
        )
        .unwrap();
        let text = scene.to_text();
        let back = Scene::from_text(&text).unwrap();
        assert_eq!(back, scene);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_scene_reports_line() {
        let text = generate_scene(&spec(1), &StereoCamera::kitti()).unwrap().to_text();
        let broken = text.replacen(" S 1", " S", 1);
        match Scene::from_text(&broken) {
            Err(Error::MalformedScene { line, .. }) => assert!(line > 15),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Scene::from_text("camera 1"), Err(Error::MalformedScene { line: 1, .. })));
    }

    fn one_object(seed: u64, texture_frequency: f64) -> (StereoCamera, SyntheticObject, RenderConfig) {
        let cam = StereoCamera::kitti();
        let s = SceneSpec {
            seed,
            num_objects: 1,
            depth_range: (10.0, 25.0),
            texture_frequency,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&s, &cam).unwrap();
        (cam, scene.objects[0].clone(), RenderConfig::for_spec(&s))
    }

    #[test]
    fn true_depth_has_zero_cost() {
        for seed in 0..4 {
            let (cam, obj, cfg) = one_object(seed, 4.0);
            let pair = render_stereo(&obj, &cam, obj.texture_seed, &cfg).unwrap();
            let mut roi = valid_roi(&cam, &obj.truth, &obj.exact.left, obj.exact.boundary_or_box()).unwrap();
            let offsets = pixel_depth_offsets(&cam, &obj.truth, &mut roi);
            let n = roi.count() as f64;
            let at_truth = photometric_cost(&pair.left, &pair.right, &cam, &roi, &offsets, obj.truth.z, 3.0).unwrap();
            assert!(at_truth < 1e-9 * n, "{at_truth}");
            let off = photometric_cost(&pair.left, &pair.right, &cam, &roi, &offsets, obj.truth.z + 0.5, 3.0).unwrap();
            assert!(off > 1e3 * at_truth.max(1e-12));
        }
    }

    #[test]
    fn rendered_disparity_matches_offsets() {
        let (cam, obj, cfg) = one_object(2, 4.0);
        let pair = render_stereo(&obj, &cam, obj.texture_seed, &cfg).unwrap();
        let mut roi = valid_roi(&cam, &obj.truth, &obj.exact.left, obj.exact.boundary_or_box()).unwrap();
        let offsets = pixel_depth_offsets(&cam, &obj.truth, &mut roi);
        let fb = cam.focal_u * cam.baseline;
        for ((u, v), dz) in roi.pixels().zip(&offsets) {
            let d = pair.disparity_at(u, v).expect("object pixel");
            assert!((d - fb / (obj.truth.z + dz)).abs() < 0.5);
        }
    }

    #[test]
    fn flat_texture_is_unobservable() {
        let (cam, obj, cfg) = one_object(1, 0.0);
        let pair = render_stereo(&obj, &cam, obj.texture_seed, &cfg).unwrap();
        let mut roi = valid_roi(&cam, &obj.truth, &obj.exact.left, obj.exact.boundary_or_box()).unwrap();
        let offsets = pixel_depth_offsets(&cam, &obj.truth, &mut roi);
        let costs: Vec<f64> = (-4..=4)
            .map(|k| obj.truth.z + 0.5 * k as f64)
            .map(|z| photometric_cost(&pair.left, &pair.right, &cam, &roi, &offsets, z, 3.0).unwrap())
            .collect();
        assert!(costs.iter().all(|&c| c == costs[0]), "{costs:?}");
    }

    #[test]
    fn full_frame_has_camera_size() {
        let cam = StereoCamera::kitti();
        let scene = generate_scene(&SceneSpec { num_objects: 2, ..spec(4) }, &cam).unwrap();
        let pair = render_frame(&scene, &RenderConfig::for_spec(&scene.spec)).unwrap();
        assert_eq!((pair.left.width(), pair.left.height()), (1242, 375));
        assert!(pair.disparity.iter().any(Option::is_some));
    }
}
