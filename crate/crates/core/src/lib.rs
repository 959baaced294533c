//! Geometric back end of a stereo 3D object detector.
//!
//! - [`geometry`]: camera model, cuboids, projection.
//! - [`estimator`]: coarse 3D box from stereo boxes and the perspective keypoint.
//! - [`align`]: dense photometric depth alignment and 3D rectification.
//! - [`codec`]: anchor labels, box/dimension/keypoint target encoding, stereo NMS.
//! - [`eval`]: IoUs, KITTI difficulty regimes, AP and stereo AP, depth-error statistics.
//! - [`synth`]: seeded synthetic scenes and stereo renderer used as ground truth.
//! - [`kitti`]: label and calibration file formats.
//! - [`config`]: tunables loaded from a key = value file.

pub mod error;
pub mod geometry;
pub mod estimator;
pub mod align;
pub mod codec;
pub mod eval;
pub mod synth;
pub mod kitti;
pub mod config;

pub use error::{Error, Result};
pub use geometry::{
    project_box3d, project_point, viewpoint_from_pose, wrap_angle, Box2D, Box3D, BoxProjection,
    Dimensions, Eye, NormalizedBox2D, PerspectiveKeypoint, StereoCamera, StereoDetection,
    Viewpoint,
};
pub use estimator::{
    extract_measurements, infer_correspondence, solve_coarse, solve_coarse_with, Correspondence,
    Measurement, MeasurementSet, SolverConfig, SolverReport,
};
pub use align::{
    align_and_rectify, align_depth, photometric_cost, pixel_depth_offsets, valid_roi,
    AlignConfig, AlignmentResult, ImagePatch, RectifyConfig, ValidRoi,
};
pub use codec::{
    decode_stereo_delta, encode_stereo_delta, label_anchors, nms_keep_both, sample_roi_pairs,
    AnchorLabel, RoiPairLabel, StereoBoxDelta, StereoGroundTruth,
};
pub use eval::{
    average_precision, difficulty_filter, iou_2d, iou_3d, iou_bev, stereo_tp_match,
    ApInterpolation, DetectionRecord, Difficulty, Frame, GroundTruthRecord, Metric, PrCurve,
};
pub use synth::{generate_scene, render_stereo, RenderConfig, Scene, SceneSpec, SyntheticObject};
pub use kitti::{
    parse_calib, parse_labels, parse_stereo_detections, CalibFile, KittiLabelRow, LabelRecord, StereoDetectionRow,
};
pub use config::PipelineConfig;
