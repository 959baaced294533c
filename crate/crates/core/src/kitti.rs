//! KITTI object label and calibration files.
//!
//! A label row has 15 whitespace-separated fields (ground truth) or 16
//! (detection, trailing score):
//!
//! ```text
//! type truncated occluded alpha u_min v_min u_max v_max h w l x y z rotation_y [score]
//! ```
//!
//! `(x, y, z)` is the bottom-face center; [`Box3D`] keeps the geometric center,
//! so `y` is shifted by `h / 2` on the way in and back on the way out.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::{right_box_from_3d, DetectionRecord, Frame, GroundTruthRecord};
use crate::geometry::{
    wrap_angle, Box2D, Box3D, Dimensions, PerspectiveKeypoint, StereoCamera, StereoDetection, Viewpoint,
};

/// Tolerance on focal length and principal point agreement between P2 and P3.
pub const RECTIFIED_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct KittiLabelRow {
    pub kind: String,
    pub truncated: f64,
    pub occluded: i32,
    pub alpha: f64,
    pub bbox: [f64; 4],
    /// `(h, w, l)` in file order.
    pub dimensions: [f64; 3],
    /// Bottom-face center.
    pub location: [f64; 3],
    pub rotation_y: f64,
    pub score: Option<f64>,
}

impl KittiLabelRow {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |reason: String| Error::MalformedRow {
            line: line_no,
            reason,
        };
        if fields.len() != 15 && fields.len() != 16 {
            return Err(bad(format!("expected 15 or 16 fields, found {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let v = fields[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("field {}: {e}", k + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("field {} is not finite", k + 1)))
            }
        };
        let occluded = fields[2]
            .parse::<i32>()
            .or_else(|_| num(2).map(|v| v as i32))
            .map_err(|_| bad("field 3: occlusion must be an integer".into()))?;
        Ok(Self {
            kind: fields[0].to_string(),
            truncated: num(1)?,
            occluded,
            alpha: num(3)?,
            bbox: [num(4)?, num(5)?, num(6)?, num(7)?],
            dimensions: [num(8)?, num(9)?, num(10)?],
            location: [num(11)?, num(12)?, num(13)?],
            rotation_y: num(14)?,
            score: if fields.len() == 16 { Some(num(15)?) } else { None },
        })
    }

    /// Fixed six-decimal rendering of every real field.
    pub fn to_line(&self) -> String {
        let mut out = format!("{} {:.6} {} {:.6}", self.kind, self.truncated, self.occluded, self.alpha);
        for v in self.bbox.iter().chain(&self.dimensions).chain(&self.location) {
            let _ = write!(out, " {v:.6}");
        }
        let _ = write!(out, " {:.6}", self.rotation_y);
        if let Some(s) = self.score {
            let _ = write!(out, " {s:.6}");
        }
        out
    }

    pub fn left_box(&self) -> Box2D {
        let [u_min, v_min, u_max, v_max] = self.bbox;
        Box2D {
            u_min,
            v_min,
            u_max,
            v_max,
        }
    }

    /// The cuboid with a center-height `y`. Rows with placeholder geometry
    /// (such as `DontCare`) are passed through unvalidated.
    pub fn box3d(&self) -> Box3D {
        let [h, w, l] = self.dimensions;
        let [x, y, z] = self.location;
        Box3D {
            x,
            y: y - h / 2.0,
            z,
            theta: self.rotation_y,
            w,
            l,
            h,
        }
    }

    pub fn from_box3d(kind: &str, left: &Box2D, b: &Box3D, alpha: f64, score: Option<f64>) -> Self {
        Self {
            kind: kind.to_string(),
            truncated: -1.0,
            occluded: -1,
            alpha: wrap_angle(alpha),
            bbox: [left.u_min, left.v_min, left.u_max, left.v_max],
            dimensions: [b.h, b.w, b.l],
            location: [b.x, b.y + b.h / 2.0, b.z],
            rotation_y: b.theta,
            score,
        }
    }

    pub fn to_ground_truth(&self, object_id: usize) -> GroundTruthRecord {
        GroundTruthRecord {
            class: self.kind.clone(),
            left: self.left_box(),
            right: None,
            box3d: self.box3d(),
            alpha: self.alpha,
            truncation: self.truncated.clamp(0.0, 1.0),
            // unknown occlusion (-1) counts as the heaviest level
            occlusion: if (0..=3).contains(&self.occluded) { self.occluded as u8 } else { 3 },
            object_id,
        }
    }

    pub fn to_detection(&self) -> DetectionRecord {
        let b = self.box3d();
        DetectionRecord {
            class: self.kind.clone(),
            left: self.left_box(),
            right: None,
            box3d: b.validate().is_ok().then_some(b),
            alpha: self.alpha,
            score: self.score.unwrap_or(1.0),
        }
    }
}

/// A parsed row, typed by its field count.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelRecord {
    GroundTruth(GroundTruthRecord),
    Detection(DetectionRecord),
}

pub fn parse_label_rows(text: &str) -> Result<Vec<KittiLabelRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| KittiLabelRow::parse(l, i + 1))
        .collect()
}

/// Rows in file order; 15-field rows become ground truth (object id = row
/// index), 16-field rows become detections.
pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>> {
    Ok(parse_label_rows(text)?
        .iter()
        .enumerate()
        .map(|(i, row)| match row.score {
            None => LabelRecord::GroundTruth(row.to_ground_truth(i)),
            Some(_) => LabelRecord::Detection(row.to_detection()),
        })
        .collect())
}

/// Ground truth from a label file; a trailing score column is ignored.
pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthRecord>> {
    Ok(parse_label_rows(text)?
        .iter()
        .enumerate()
        .map(|(i, row)| row.to_ground_truth(i))
        .collect())
}

/// Detections from a result file. A row without a score column counts as
/// score 1, so a label file can be scored against itself.
pub fn parse_detections(text: &str) -> Result<Vec<DetectionRecord>> {
    Ok(parse_label_rows(text)?.iter().map(KittiLabelRow::to_detection).collect())
}

pub fn serialize_rows(rows: &[KittiLabelRow]) -> String {
    rows.iter().map(|r| r.to_line() + "\n").collect()
}

/// Stereo detection row, 16 whitespace-separated fields:
///
/// ```text
/// type u_min v_min u_max v_max right_u_min right_u_max alpha keypoint_u keypoint_corner boundary_left boundary_right h w l score
/// ```
///
/// The right box shares the left box's rows. The keypoint pair and the
/// boundary pair are each written `- -` when absent.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoDetectionRow {
    pub kind: String,
    pub detection: StereoDetection,
}

impl StereoDetectionRow {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |reason: String| Error::MalformedRow {
            line: line_no,
            reason,
        };
        if fields.len() != 16 {
            return Err(bad(format!("expected 16 fields, found {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let v = fields[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("field {}: {e}", k + 1)))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad(format!("field {} is not finite", k + 1)))
            }
        };
        let absent = |k: usize| -> Result<bool> {
            match (fields[k] == "-", fields[k + 1] == "-") {
                (true, true) => Ok(true),
                (false, false) => Ok(false),
                _ => Err(bad(format!("fields {} and {} must both be given or both be -", k + 1, k + 2))),
            }
        };
        let left = Box2D::new(num(1)?, num(2)?, num(3)?, num(4)?).map_err(|e| bad(e.to_string()))?;
        let right = Box2D::new(num(5)?, left.v_min, num(6)?, left.v_max).map_err(|e| bad(e.to_string()))?;
        let keypoint = if absent(8)? {
            None
        } else {
            let corner = fields[9]
                .parse::<usize>()
                .ok()
                .filter(|&c| c < 4)
                .ok_or_else(|| bad("field 10: keypoint corner must be 0..3".into()))?;
            Some(PerspectiveKeypoint { u: num(8)?, corner })
        };
        let boundary = if absent(10)? { None } else { Some((num(10)?, num(11)?)) };
        let dims = Dimensions::new(num(13)?, num(14)?, num(12)?).map_err(|e| bad(e.to_string()))?;
        Ok(Self {
            kind: fields[0].to_string(),
            detection: StereoDetection {
                left,
                right,
                alpha: Viewpoint::new(num(7)?),
                keypoint,
                boundary,
                dims,
                score: num(15)?,
            },
        })
    }

    pub fn to_line(&self) -> String {
        let d = &self.detection;
        let mut out = format!(
            "{} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
            self.kind, d.left.u_min, d.left.v_min, d.left.u_max, d.left.v_max, d.right.u_min, d.right.u_max, d.alpha.alpha
        );
        match d.keypoint {
            Some(k) => {
                let _ = write!(out, " {:.6} {}", k.u, k.corner);
            }
            None => out.push_str(" - -"),
        }
        match d.boundary {
            Some((a, b)) => {
                let _ = write!(out, " {a:.6} {b:.6}");
            }
            None => out.push_str(" - -"),
        }
        let _ = write!(out, " {:.6} {:.6} {:.6} {:.6}", d.dims.h, d.dims.w, d.dims.l, d.score);
        out
    }
}

pub fn parse_stereo_detections(text: &str) -> Result<Vec<StereoDetectionRow>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| StereoDetectionRow::parse(l, i + 1))
        .collect()
}

pub fn serialize_stereo_detections(rows: &[StereoDetectionRow]) -> String {
    rows.iter().map(|r| r.to_line() + "\n").collect()
}

/// Left and right rectified projection matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibFile {
    pub p2: [[f64; 4]; 3],
    pub p3: [[f64; 4]; 3],
}

impl CalibFile {
    pub fn parse(text: &str) -> Result<Self> {
        let find = |key: &'static str| -> Result<[[f64; 4]; 3]> {
            let line = text
                .lines()
                .find(|l| l.trim_start().starts_with(&format!("{key}:")))
                .ok_or(Error::MissingMatrix(key))?;
            let values: Vec<f64> = line
                .split_once(':')
                .map(|x| x.1)
                .unwrap_or("")
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::MissingMatrix(key))?;
            if values.len() != 12 || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::MissingMatrix(key));
            }
            Ok(std::array::from_fn(|r| std::array::from_fn(|c| values[r * 4 + c])))
        };
        Ok(Self {
            p2: find("P2")?,
            p3: find("P3")?,
        })
    }

    pub fn to_text(&self) -> String {
        let row = |m: &[[f64; 4]; 3]| {
            m.iter()
                .flatten()
                .map(|v| format!("{v:.12e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!("P2: {}\nP3: {}\n", row(&self.p2), row(&self.p3))
    }

    /// Projection matrices of an ideal rectified rig with the left camera at
    /// the label origin.
    pub fn from_camera(camera: &StereoCamera) -> Self {
        let k = |tx: f64| {
            [
                [camera.focal_u, 0.0, camera.principal_u, tx],
                [0.0, camera.focal_v, camera.principal_v, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ]
        };
        Self {
            p2: k(0.0),
            p3: k(-camera.focal_u * camera.baseline),
        }
    }

    /// Camera model with the given image size.
    pub fn camera(&self, image_width: u32, image_height: u32) -> Result<StereoCamera> {
        let (l, r) = (&self.p2, &self.p3);
        let pairs = [
            ("focal_u", l[0][0], r[0][0]),
            ("focal_v", l[1][1], r[1][1]),
            ("principal_u", l[0][2], r[0][2]),
            ("principal_v", l[1][2], r[1][2]),
        ];
        for (name, a, b) in pairs {
            if (a - b).abs() > RECTIFIED_TOLERANCE {
                return Err(Error::NonRectifiedPair(format!("{name} differs: {a} vs {b}")));
            }
        }
        let focal = l[0][0];
        StereoCamera::new(
            focal,
            l[1][1],
            l[0][2],
            l[1][2],
            (l[0][3] - r[0][3]) / focal,
            image_width,
            image_height,
        )
    }

    /// Amount added to label-frame `x` to express it in the left camera frame
    /// (`P2[0,3] / focal`; zero for an ideal rig).
    pub fn left_camera_shift(&self) -> f64 {
        self.p2[0][3] / self.p2[0][0]
    }
}

/// Default KITTI image size used when a calibration carries none.
pub const KITTI_IMAGE_SIZE: (u32, u32) = (1242, 375);

pub fn parse_calib(text: &str) -> Result<StereoCamera> {
    CalibFile::parse(text)?.camera(KITTI_IMAGE_SIZE.0, KITTI_IMAGE_SIZE.1)
}

/// One image's detections and ground truth. Right boxes are the clipped
/// right-image projections of the 3D boxes when a calibration is given.
pub fn frame_from_texts(labels: &str, detections: &str, calib: Option<&str>) -> Result<Frame> {
    let mut ground_truth = parse_ground_truth(labels)?;
    let mut detections = parse_detections(detections)?;
    if let Some(text) = calib {
        let file = CalibFile::parse(text)?;
        let camera = file.camera(KITTI_IMAGE_SIZE.0, KITTI_IMAGE_SIZE.1)?;
        let shift = file.left_camera_shift();
        let in_camera = |b: &Box3D| Box3D { x: b.x + shift, ..*b };
        for g in &mut ground_truth {
            if g.box3d.validate().is_ok() {
                g.right = right_box_from_3d(&camera, &in_camera(&g.box3d));
            }
        }
        for d in &mut detections {
            d.right = d.box3d.as_ref().and_then(|b| right_box_from_3d(&camera, &in_camera(b)));
        }
    }
    Ok(Frame {
        detections,
        ground_truth,
    })
}
