//! Dense photometric alignment of the object-center depth.
//!
//! The coarse cuboid fixes, for every pixel of the valid RoI, the depth offset
//! `dz_i` between the surface seen through that pixel and the box center. The
//! center depth `z` is then the only unknown: each left pixel is compared with
//! the right image sampled `focal * b / (z + dz_i)` pixels to the left, and the
//! summed squared RGB difference is minimised by a two-stage enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{solve_coarse_with, MeasurementSet, SolverConfig, SolverReport};
use crate::geometry::{Box2D, Box3D, StereoCamera, StereoDetection};

pub type Rgb = [f64; 3];

/// RGB patch in `[0, 1]`, positioned in full-image pixel coordinates.
/// Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePatch {
    width: usize,
    height: usize,
    /// Full-image coordinates of the patch's pixel (0, 0).
    origin: (i64, i64),
    data: Vec<Rgb>,
}

impl ImagePatch {
    pub fn new(width: usize, height: usize, origin: (i64, i64), data: Vec<Rgb>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidPatch("data length does not match dimensions"));
        }
        if data
            .iter()
            .flatten()
            .any(|c| !c.is_finite() || !(0.0..=1.0).contains(c))
        {
            return Err(Error::InvalidPatch("intensities must be finite and in [0, 1]"));
        }
        Ok(Self {
            width,
            height,
            origin,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, origin: (i64, i64), value: Rgb) -> Result<Self> {
        Self::new(width, height, origin, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn data(&self) -> &[Rgb] {
        &self.data
    }

    /// Pixel at full-image integer coordinates.
    pub fn get(&self, u: i64, v: i64) -> Option<Rgb> {
        let (i, j) = (u - self.origin.0, v - self.origin.1);
        if i < 0 || j < 0 || i >= self.width as i64 || j >= self.height as i64 {
            return None;
        }
        Some(self.data[j as usize * self.width + i as usize])
    }

    /// Bilinear sample at full-image coordinates; `None` when any contributing
    /// neighbour lies outside the patch.
    pub fn bilinear(&self, u: f64, v: f64) -> Option<Rgb> {
        let (x, y) = (u - self.origin.0 as f64, v - self.origin.1 as f64);
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
        let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
        if x0 < 0 || y0 < 0 || x1 >= self.width as i64 || y1 >= self.height as i64 {
            return None;
        }
        let at = |i: i64, j: i64| self.data[j as usize * self.width + i as usize];
        let (a, b, c, d) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
        Some(std::array::from_fn(|k| {
            let top = a[k] + fx * (b[k] - a[k]);
            let bottom = c[k] + fx * (d[k] - c[k]);
            top + fy * (bottom - top)
        }))
    }

    /// Applies `gain * value + offset` to every channel and clamps to `[0, 1]`.
    pub fn map_intensity(&self, gain: f64, offset: f64) -> ImagePatch {
        let data = self
            .data
            .iter()
            .map(|p| p.map(|c| (gain * c + offset).clamp(0.0, 1.0)))
            .collect();
        ImagePatch { data, ..*self }
    }
}

/// Pixels of the left image used for alignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidRoi {
    origin: (i64, i64),
    width: usize,
    height: usize,
    mask: Vec<bool>,
    count: usize,
}

impl ValidRoi {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, u: i64, v: i64) -> bool {
        let (i, j) = (u - self.origin.0, v - self.origin.1);
        i >= 0
            && j >= 0
            && (i as usize) < self.width
            && (j as usize) < self.height
            && self.mask[j as usize * self.width + i as usize]
    }

    /// Masked pixels in full-image coordinates, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(idx, _)| {
            (
                self.origin.0 + (idx % self.width) as i64,
                self.origin.1 + (idx / self.width) as i64,
            )
        })
    }

    /// Keeps only the pixels for which `keep` returns true.
    pub fn retain(&mut self, mut keep: impl FnMut(i64, i64) -> bool) {
        for idx in 0..self.mask.len() {
            if self.mask[idx] {
                let u = self.origin.0 + (idx % self.width) as i64;
                let v = self.origin.1 + (idx / self.width) as i64;
                if !keep(u, v) {
                    self.mask[idx] = false;
                    self.count -= 1;
                }
            }
        }
    }
}

/// Pixels between the boundary keypoints whose ray first meets the coarse
/// cuboid in its lower half (`y >= center y`).
pub fn valid_roi(
    camera: &StereoCamera,
    coarse: &Box3D,
    left_box: &Box2D,
    boundary: (f64, f64),
) -> Result<ValidRoi> {
    coarse.validate()?;
    let u_lo = boundary.0.max(left_box.u_min).ceil() as i64;
    let u_hi = boundary.1.min(left_box.u_max).floor() as i64;
    let v_lo = left_box.v_min.ceil() as i64;
    let v_hi = left_box.v_max.floor() as i64;
    if u_hi < u_lo || v_hi < v_lo {
        return Err(Error::EmptyRoi);
    }
    let width = (u_hi - u_lo + 1) as usize;
    let height = (v_hi - v_lo + 1) as usize;
    let origin = nalgebra::Point3::origin();
    let mask: Vec<bool> = (0..width * height)
        .map(|idx| {
            let u = (u_lo + (idx % width) as i64) as f64;
            let v = (v_lo + (idx / width) as i64) as f64;
            coarse
                .ray_entry(&origin, &camera.pixel_ray(u, v))
                .is_some_and(|hit| hit.point.y >= coarse.y)
        })
        .collect();
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyRoi);
    }
    Ok(ValidRoi {
        origin: (u_lo, v_lo),
        width,
        height,
        mask,
        count,
    })
}

/// Depth of the first ray-cuboid intersection minus the box center depth, one
/// value per RoI pixel in [`ValidRoi::pixels`] order. Pixels whose ray misses
/// the cuboid are removed from the RoI.
pub fn pixel_depth_offsets(camera: &StereoCamera, coarse: &Box3D, roi: &mut ValidRoi) -> Vec<f64> {
    let origin = nalgebra::Point3::origin();
    let mut offsets = Vec::with_capacity(roi.count());
    roi.retain(|u, v| match coarse.ray_entry(&origin, &camera.pixel_ray(u as f64, v as f64)) {
        Some(hit) => {
            // pixel rays have unit z, so t is the depth
            offsets.push(hit.t - coarse.z);
            true
        }
        None => false,
    });
    offsets
}

/// Enumeration schedule and penalties for [`align_depth`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub coarse_step: f64,
    pub coarse_count: usize,
    pub fine_step: f64,
    pub fine_count: usize,
    /// Cost of a pixel whose warped position leaves the right patch.
    pub oob_penalty: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            coarse_step: 0.5,
            coarse_count: 50,
            fine_step: 0.05,
            fine_count: 20,
            oob_penalty: 3.0,
        }
    }
}

/// Sum over RoI pixels of the squared RGB difference between the left pixel
/// and the right image at the disparity implied by `z + dz_i`.
pub fn photometric_cost(
    left: &ImagePatch,
    right: &ImagePatch,
    camera: &StereoCamera,
    roi: &ValidRoi,
    offsets: &[f64],
    z: f64,
    oob_penalty: f64,
) -> Result<f64> {
    if offsets.len() != roi.count() {
        return Err(Error::InvalidPatch("offset count does not match the RoI"));
    }
    if let Some(bad) = offsets.iter().map(|dz| z + dz).find(|d| !(*d > 0.0)) {
        return Err(Error::NonPositiveWarpDepth(bad));
    }
    let fb = camera.focal_u * camera.baseline;
    let mut total = 0.0;
    for ((u, v), dz) in roi.pixels().zip(offsets) {
        let lp = left
            .get(u, v)
            .ok_or(Error::InvalidPatch("RoI pixel outside the left patch"))?;
        let shifted = u as f64 - fb / (z + dz);
        total += match right.bilinear(shifted, v as f64) {
            Some(rp) => (0..3).map(|k| (lp[k] - rp[k]).powi(2)).sum::<f64>(),
            None => oob_penalty,
        };
    }
    Ok(total)
}

/// Which enumeration stage produced a cost sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Coarse,
    Fine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub stage: Stage,
    pub depth: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub depth: f64,
    pub samples: Vec<CostSample>,
    pub pixel_count: usize,
}

/// Two-stage depth enumeration: `coarse_count` depths at `coarse_step` around
/// `z_init` (offsets `-n/2 .. n/2 - 1`), then `fine_count` depths at `fine_step`
/// around the coarse argmin. Candidates with `z + dz_i <= 0` are skipped.
pub fn align_depth(
    left: &ImagePatch,
    right: &ImagePatch,
    camera: &StereoCamera,
    roi: &ValidRoi,
    offsets: &[f64],
    z_init: f64,
    config: &AlignConfig,
) -> Result<AlignmentResult> {
    if !(z_init > 0.0) {
        return Err(Error::NonPositiveDepth(z_init));
    }
    if roi.count() == 0 {
        return Err(Error::EmptyRoi);
    }
    let min_offset = offsets.iter().copied().fold(f64::INFINITY, f64::min);

    let evaluate = |stage: Stage, center: f64, step: f64, count: usize| -> Result<Vec<CostSample>> {
        let half = (count / 2) as i64;
        let depths: Vec<f64> = (-half..count as i64 - half)
            .map(|k| center + k as f64 * step)
            .filter(|z| z + min_offset > 0.0)
            .collect();
        depths
            .par_iter()
            .map(|&depth| {
                photometric_cost(left, right, camera, roi, offsets, depth, config.oob_penalty)
                    .map(|cost| CostSample { stage, depth, cost })
            })
            .collect()
    };
    let argmin = |samples: &[CostSample]| {
        samples
            .iter()
            .fold(None::<CostSample>, |best, s| match best {
                Some(b) if b.cost <= s.cost => Some(b),
                _ => Some(*s),
            })
    };

    let coarse = evaluate(Stage::Coarse, z_init, config.coarse_step, config.coarse_count)?;
    let rough = argmin(&coarse).ok_or(Error::AllCandidatesInvalid)?;
    let fine = evaluate(Stage::Fine, rough.depth, config.fine_step, config.fine_count)?;
    let best = argmin(&fine).ok_or(Error::AllCandidatesInvalid)?;

    let mut samples = coarse;
    samples.extend(fine);
    Ok(AlignmentResult {
        depth: best.depth,
        samples,
        pixel_count: roi.count(),
    })
}

/// Settings for the align-then-rectify stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RectifyConfig {
    /// When false the coarse box is returned unchanged.
    pub alignment: bool,
    pub align: AlignConfig,
    pub solver: SolverConfig,
}

impl Default for RectifyConfig {
    fn default() -> Self {
        Self {
            alignment: true,
            align: AlignConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedBox {
    pub box3d: Box3D,
    /// Absent when alignment is disabled.
    pub alignment: Option<AlignmentResult>,
}

/// Aligns the depth of a coarse box against the stereo images, then re-solves
/// the box with the depth fixed to the aligned value.
pub fn align_and_rectify(
    det: &StereoDetection,
    meas: &MeasurementSet,
    coarse: &SolverReport,
    left: &ImagePatch,
    right: &ImagePatch,
    camera: &StereoCamera,
    config: &RectifyConfig,
) -> Result<RectifiedBox> {
    if !coarse.converged {
        return Err(Error::CoarseNotConverged);
    }
    if !config.alignment {
        return Ok(RectifiedBox {
            box3d: coarse.solution,
            alignment: None,
        });
    }
    let box3d = coarse.solution;
    let mut roi = valid_roi(camera, &box3d, &det.left, det.boundary_or_box())?;
    let offsets = pixel_depth_offsets(camera, &box3d, &mut roi);
    let alignment = align_depth(left, right, camera, &roi, &offsets, box3d.z, &config.align)?;
    let rectified = solve_coarse_with(meas, box3d.dims(), camera, Some(alignment.depth), &config.solver)?;
    Ok(RectifiedBox {
        box3d: rectified.solution,
        alignment: Some(alignment),
    })
}
