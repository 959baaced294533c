use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stereobox::align::{align_and_rectify, Stage};
use stereobox::estimator::{extract_measurements, solve_coarse_with, MeasurementSet, SolverReport};
use stereobox::eval::{ap_table, ap_table_csv, depth_bins_csv, depth_error_stats, evaluate, match_depth_pairs, pr_curve_csv, standard_table_rows};
use stereobox::geometry::{viewpoint_from_pose, Box3D, StereoCamera, StereoDetection};
use stereobox::kitti::{
    frame_from_texts, parse_stereo_detections, serialize_rows, serialize_stereo_detections, CalibFile,
    KittiLabelRow, StereoDetectionRow, KITTI_IMAGE_SIZE,
};
use stereobox::synth::{generate_scene, render_frame};
use stereobox::{ApInterpolation, Difficulty, Frame, PipelineConfig, SceneSpec};

use crate::data::{frame_path, load_png, read_text, save_png, write_text, Frames};
use crate::error::{Category, CliError, CliResult};
use crate::svg::depth_curve_svg;

/// Output of one frame plus per-object problems, reported in frame order.
struct FrameOutput<T> {
    value: T,
    warnings: Vec<String>,
}

fn report<T>(stem: &Option<String>, out: &FrameOutput<T>, strict: bool) -> CliResult<()> {
    for w in &out.warnings {
        eprintln!("warning: {}: {w}", Frames::label(stem));
    }
    if strict && !out.warnings.is_empty() {
        return Err(CliError::new(
            Category::Compute,
            format!("{}: {} object(s) failed", Frames::label(stem), out.warnings.len()),
        ));
    }
    Ok(())
}

/// Camera and label-frame offset from a calibration file.
fn load_camera(path: &Path, image_size: (u32, u32)) -> CliResult<(StereoCamera, f64)> {
    let file = CalibFile::parse(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))?;
    let camera = file
        .camera(image_size.0, image_size.1)
        .map_err(|e| CliError::from(e).in_file(path))?;
    Ok((camera, file.left_camera_shift()))
}

fn load_stereo_detections(path: &Path) -> CliResult<Vec<StereoDetectionRow>> {
    parse_stereo_detections(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))
}

fn coarse_solve(
    det: &StereoDetection,
    camera: &StereoCamera,
    config: &PipelineConfig,
) -> stereobox::Result<(MeasurementSet, SolverReport)> {
    let meas = extract_measurements(camera, det)?;
    let report = solve_coarse_with(&meas, det.dims, camera, None, &config.solver)?;
    Ok((meas, report))
}

/// A solved box as a scored KITTI row in the label frame.
fn label_row(kind: &str, det: &StereoDetection, b: &Box3D, shift: f64) -> KittiLabelRow {
    let alpha = viewpoint_from_pose(b).alpha;
    let in_labels = Box3D { x: b.x - shift, ..*b };
    KittiLabelRow::from_box3d(kind, &det.left, &in_labels, alpha, Some(det.score))
}

/// Outputs must be directories when the inputs are.
fn check_dir(frames: &Frames, path: &Path, what: &str) -> CliResult<()> {
    if frames.is_dir() && path.is_file() {
        return Err(CliError::new(
            Category::Input,
            format!("{what} {} must be a directory when the detections are", path.display()),
        ));
    }
    Ok(())
}

pub struct SolveArgs {
    pub detections: PathBuf,
    pub calib: PathBuf,
    pub out: PathBuf,
    pub strict: bool,
}

pub fn solve(args: &SolveArgs, config: &PipelineConfig) -> CliResult<()> {
    let frames = Frames::discover(&args.detections)?;
    check_dir(&frames, &args.calib, "calibration")?;
    check_dir(&frames, &args.out, "output")?;
    let outputs: Vec<CliResult<FrameOutput<String>>> = frames
        .stems
        .par_iter()
        .map(|stem| {
            let (camera, shift) = load_camera(&frame_path(&args.calib, stem, "txt"), KITTI_IMAGE_SIZE)?;
            let rows = load_stereo_detections(&frame_path(&args.detections, stem, "txt"))?;
            let mut out = Vec::new();
            let mut warnings = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                match coarse_solve(&row.detection, &camera, config) {
                    Ok((_, r)) => out.push(label_row(&row.kind, &row.detection, &r.solution, shift)),
                    Err(e) => warnings.push(format!("detection {}: {e}", i + 1)),
                }
            }
            Ok(FrameOutput {
                value: serialize_rows(&out),
                warnings,
            })
        })
        .collect();
    for (stem, out) in frames.stems.iter().zip(outputs) {
        let out = out?;
        report(stem, &out, args.strict)?;
        write_text(&frame_path(&args.out, stem, "txt"), &out.value)?;
    }
    Ok(())
}

pub struct AlignArgs {
    pub detections: PathBuf,
    pub calib: PathBuf,
    pub left: PathBuf,
    pub right: PathBuf,
    pub out: PathBuf,
    pub costs: Option<PathBuf>,
    pub strict: bool,
}

pub fn align(args: &AlignArgs, config: &PipelineConfig) -> CliResult<()> {
    let frames = Frames::discover(&args.detections)?;
    for (p, what) in [(&args.calib, "calibration"), (&args.left, "left image"), (&args.right, "right image"), (&args.out, "output")] {
        check_dir(&frames, p, what)?;
    }
    let rectify = config.rectify();
    let outputs: Vec<CliResult<FrameOutput<(String, String)>>> = frames
        .stems
        .par_iter()
        .map(|stem| {
            let left = load_png(&frame_path(&args.left, stem, "png"))?;
            let right = load_png(&frame_path(&args.right, stem, "png"))?;
            if (left.width(), left.height()) != (right.width(), right.height()) {
                return Err(CliError::new(Category::Input, "left and right images differ in size"));
            }
            let size = (left.width() as u32, left.height() as u32);
            let (camera, shift) = load_camera(&frame_path(&args.calib, stem, "txt"), size)?;
            let rows = load_stereo_detections(&frame_path(&args.detections, stem, "txt"))?;
            let mut labels = Vec::new();
            let mut costs = String::from("detection,stage,depth,cost\n");
            let mut warnings = Vec::new();
            for (i, row) in rows.iter().enumerate() {
                let det = &row.detection;
                let rectified = coarse_solve(det, &camera, config)
                    .and_then(|(meas, coarse)| align_and_rectify(det, &meas, &coarse, &left, &right, &camera, &rectify));
                match rectified {
                    Ok(r) => {
                        labels.push(label_row(&row.kind, det, &r.box3d, shift));
                        for s in r.alignment.iter().flat_map(|a| &a.samples) {
                            let stage = match s.stage {
                                Stage::Coarse => "coarse",
                                Stage::Fine => "fine",
                            };
                            let _ = writeln!(costs, "{},{stage},{:.6},{:.9}", i + 1, s.depth, s.cost);
                        }
                    }
                    Err(e) => warnings.push(format!("detection {}: {e}", i + 1)),
                }
            }
            Ok(FrameOutput {
                value: (serialize_rows(&labels), costs),
                warnings,
            })
        })
        .collect();
    for (stem, out) in frames.stems.iter().zip(outputs) {
        let out = out?;
        report(stem, &out, args.strict)?;
        write_text(&frame_path(&args.out, stem, "txt"), &out.value.0)?;
        if let Some(costs) = &args.costs {
            let path = match stem {
                Some(s) => costs.join(format!("{s}.csv")),
                None => costs.clone(),
            };
            write_text(&path, &out.value.1)?;
        }
    }
    Ok(())
}

pub struct EvalArgs {
    pub gt: PathBuf,
    pub det: PathBuf,
    pub calib: Option<PathBuf>,
    pub class: Option<String>,
    pub interpolation: Option<ApInterpolation>,
    pub out: Option<PathBuf>,
    pub pr_dir: Option<PathBuf>,
}

/// Frames keyed by the ground-truth files. In directory mode a missing
/// detection file means no detections for that frame.
fn load_frames(gt: &Path, det: &Path, calib: Option<&Path>) -> CliResult<(Frames, Vec<Frame>)> {
    let frames = Frames::discover(gt)?;
    let loaded = frames
        .stems
        .par_iter()
        .map(|stem| {
            let labels = read_text(&frame_path(gt, stem, "txt"))?;
            let det_path = frame_path(det, stem, "txt");
            let dets = if stem.is_some() && !det_path.exists() {
                String::new()
            } else {
                read_text(&det_path)?
            };
            let calib_text = calib.map(|c| read_text(&frame_path(c, stem, "txt"))).transpose()?;
            frame_from_texts(&labels, &dets, calib_text.as_deref())
                .map_err(|e| CliError::from(e).in_file(&frame_path(gt, stem, "txt")))
        })
        .collect::<CliResult<Vec<Frame>>>()?;
    Ok((frames, loaded))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn eval(args: &EvalArgs, config: &PipelineConfig) -> CliResult<()> {
    let (_, frames) = load_frames(&args.gt, &args.det, args.calib.as_deref())?;
    let class = args.class.as_deref().unwrap_or(&config.eval.class);
    let interp = args.interpolation.unwrap_or(config.eval.interpolation);
    let rows = standard_table_rows();
    emit(args.out.as_deref(), &ap_table_csv(&ap_table(&frames, class, &rows, interp)))?;
    if let Some(dir) = &args.pr_dir {
        for (metric, t) in rows {
            for regime in Difficulty::ALL {
                // regimes without ground truth have no curve
                if let Ok(curve) = evaluate(&frames, class, metric, t, regime, interp) {
                    let name = format!("{}_{:.2}_{}.csv", metric.name(), t, regime.name());
                    write_text(&dir.join(name), &pr_curve_csv(&curve))?;
                }
            }
        }
    }
    Ok(())
}

pub struct DepthCurveArgs {
    pub gt: PathBuf,
    pub det: PathBuf,
    pub calib: PathBuf,
    pub class: Option<String>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

pub fn depth_curve(args: &DepthCurveArgs, config: &PipelineConfig) -> CliResult<()> {
    let (stems, frames) = load_frames(&args.gt, &args.det, Some(&args.calib))?;
    let mut focal_baseline: Option<f64> = None;
    for stem in &stems.stems {
        let (camera, _) = load_camera(&frame_path(&args.calib, stem, "txt"), KITTI_IMAGE_SIZE)?;
        let fb = camera.focal_u * camera.baseline;
        match focal_baseline {
            Some(prev) if (prev - fb).abs() > 1e-6 * prev => {
                return Err(CliError::new(
                    Category::Input,
                    "calibrations disagree on focal length times baseline",
                ));
            }
            _ => focal_baseline = Some(fb),
        }
    }
    let fb = focal_baseline.ok_or_else(|| CliError::new(Category::Input, "no frames"))?;
    let e = &config.eval;
    let class = args.class.as_deref().unwrap_or(&e.class);
    let pairs = match_depth_pairs(&frames, class, e.depth_min_iou);
    let bins = depth_error_stats(&pairs, fb, &e.depth_bin_centers, e.depth_bin_half_width, e.depth_min_iou);
    emit(args.csv.as_deref(), &depth_bins_csv(&bins))?;
    if let Some(svg) = &args.svg {
        write_text(svg, &depth_curve_svg(&bins, fb))?;
    }
    Ok(())
}

pub struct SynthArgs {
    pub seed: u64,
    pub out: PathBuf,
    pub frames: u32,
    pub spec: SceneSpec,
}

/// Per frame: `scene/`, `calib/`, `label_2/` (ground truth), `stereo_det/`
/// (noisy stereo detections) and rendered `image_2/`, `image_3/`.
pub fn synth(args: &SynthArgs, config: &PipelineConfig) -> CliResult<()> {
    let camera = StereoCamera::kitti();
    let calib = CalibFile::from_camera(&camera).to_text();
    let render = stereobox::RenderConfig {
        texture_frequency: args.spec.texture_frequency,
        ..config.render.clone()
    };
    let written: Vec<CliResult<()>> = (0..args.frames)
        .into_par_iter()
        .map(|i| {
            let spec = SceneSpec {
                seed: args.seed.wrapping_add(u64::from(i)),
                ..args.spec.clone()
            };
            let scene = generate_scene(&spec, &camera)?;
            let stem = format!("{i:06}");
            let file = |dir: &str, ext: &str| args.out.join(dir).join(format!("{stem}.{ext}"));
            let labels: Vec<KittiLabelRow> = scene
                .objects
                .iter()
                .map(|o| {
                    let mut row = KittiLabelRow::from_box3d("Car", &o.exact.left, &o.truth, o.exact.alpha.alpha, None);
                    row.truncated = 0.0;
                    row.occluded = 0;
                    row
                })
                .collect();
            let dets: Vec<StereoDetectionRow> = scene
                .objects
                .iter()
                .map(|o| StereoDetectionRow {
                    kind: "Car".into(),
                    detection: o.noisy.clone(),
                })
                .collect();
            write_text(&file("scene", "txt"), &scene.to_text())?;
            write_text(&file("calib", "txt"), &calib)?;
            write_text(&file("label_2", "txt"), &serialize_rows(&labels))?;
            write_text(&file("stereo_det", "txt"), &serialize_stereo_detections(&dets))?;
            let pair = render_frame(&scene, &render)?;
            save_png(&file("image_2", "png"), &pair.left)?;
            save_png(&file("image_3", "png"), &pair.right)?;
            Ok(())
        })
        .collect();
    written.into_iter().collect()
}
