//! `stereobox`: solve, align, evaluate and synthesize stereo 3D boxes.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 malformed input, 5 config,
//! 6 computation failure. The worker thread count comes from
//! `STEREOBOX_THREADS` (default: all cores).

mod commands;
mod data;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stereobox::{ApInterpolation, SceneSpec};

use crate::commands::{AlignArgs, DepthCurveArgs, EvalArgs, SolveArgs, SynthArgs};
use crate::error::{Category, CliError, CliResult};

#[derive(Parser)]
#[command(name = "stereobox", version, about = "Stereo 3D object boxes from 2D detections")]
struct Cli {
    /// TOML file overriding solver, alignment, codec, eval and render settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interp {
    #[value(name = "11")]
    Eleven,
    #[value(name = "40")]
    Forty,
}

#[derive(Subcommand)]
enum Command {
    /// Coarse 3D boxes from stereo detections; writes scored KITTI labels.
    Solve {
        /// Stereo detection file or directory.
        #[arg(long)]
        detections: PathBuf,
        /// Calibration file or directory.
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Fail when any detection cannot be solved.
        #[arg(long)]
        strict: bool,
    },
    /// Coarse solve, dense depth alignment on the image pair, then rectify.
    Align {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        /// Left PNG image or directory.
        #[arg(long)]
        left: PathBuf,
        /// Right PNG image or directory.
        #[arg(long)]
        right: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-detection cost curves (CSV file or directory).
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// AP table (2D left/right/stereo, BEV, 3D per difficulty) as CSV.
    Eval {
        /// Ground-truth label file or directory.
        #[arg(long)]
        gt: PathBuf,
        /// Detection file or directory.
        #[arg(long)]
        det: PathBuf,
        /// Calibration, needed for right-image and stereo metrics.
        #[arg(long)]
        calib: Option<PathBuf>,
        #[arg(long)]
        class: Option<String>,
        /// Recall points.
        #[arg(long, value_enum)]
        interp: Option<Interp>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-metric precision/recall curves.
        #[arg(long)]
        pr_dir: Option<PathBuf>,
    },
    /// Synthetic scenes with rendered stereo pairs and noisy detections.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        frames: u32,
        #[arg(long, default_value_t = 4)]
        objects: usize,
        #[arg(long, default_value_t = 5.0)]
        min_depth: f64,
        #[arg(long, default_value_t = 50.0)]
        max_depth: f64,
        /// Gaussian noise on every box edge, pixels.
        #[arg(long, default_value_t = 0.0)]
        edge_noise: f64,
        /// Gaussian shift of the right box, pixels.
        #[arg(long, default_value_t = 0.0)]
        disparity_noise: f64,
        /// Gaussian viewpoint noise, radians.
        #[arg(long, default_value_t = 0.0)]
        viewpoint_noise: f64,
        /// Gaussian keypoint noise, in keypoint bins.
        #[arg(long, default_value_t = 0.0)]
        keypoint_noise: f64,
        /// Texture lattice cells per meter; 0 renders flat objects.
        #[arg(long, default_value_t = 4.0)]
        texture_frequency: f64,
        #[arg(long)]
        allow_truncation: bool,
    },
    /// Depth-error quartiles per distance bin (CSV) and a plot (SVG).
    DepthCurve {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        det: PathBuf,
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        class: Option<String>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn init_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("STEREOBOX_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| CliError::new(Category::Config, format!("STEREOBOX_THREADS={value} is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::new(Category::Config, e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    let config = data::load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Solve {
            detections,
            calib,
            out,
            strict,
        } => commands::solve(
            &SolveArgs {
                detections,
                calib,
                out,
                strict,
            },
            &config,
        ),
        Command::Align {
            detections,
            calib,
            left,
            right,
            out,
            costs,
            strict,
        } => commands::align(
            &AlignArgs {
                detections,
                calib,
                left,
                right,
                out,
                costs,
                strict,
            },
            &config,
        ),
        Command::Eval {
            gt,
            det,
            calib,
            class,
            interp,
            out,
            pr_dir,
        } => commands::eval(
            &EvalArgs {
                gt,
                det,
                calib,
                class,
                interpolation: interp.map(|i| match i {
                    Interp::Eleven => ApInterpolation::Eleven,
                    Interp::Forty => ApInterpolation::Forty,
                }),
                out,
                pr_dir,
            },
            &config,
        ),
        Command::Synth {
            seed,
            out,
            frames,
            objects,
            min_depth,
            max_depth,
            edge_noise,
            disparity_noise,
            viewpoint_noise,
            keypoint_noise,
            texture_frequency,
            allow_truncation,
        } => {
            let spec = SceneSpec {
                seed,
                num_objects: objects,
                depth_range: (min_depth, max_depth),
                edge_noise,
                disparity_noise,
                viewpoint_noise,
                keypoint_noise,
                texture_frequency,
                allow_truncation,
                ..SceneSpec::default()
            };
            commands::synth(&SynthArgs { seed, out, frames, spec }, &config)
        }
        Command::DepthCurve {
            gt,
            det,
            calib,
            class,
            csv,
            svg,
        } => commands::depth_curve(
            &DepthCurveArgs {
                gt,
                det,
                calib,
                class,
                csv,
                svg,
            },
            &config,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code() as u8)
        }
    }
}
