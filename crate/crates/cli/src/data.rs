//! File-or-directory inputs, text and PNG I/O.
//!
//! Every command takes either single files or directories of per-frame files
//! named `<stem>.txt` / `<stem>.png`. Frames are processed in sorted stem order.

use std::path::{Path, PathBuf};

use stereobox::align::ImagePatch;
use stereobox::PipelineConfig;

use crate::error::{Category, CliError, CliResult};

/// Frames named by the primary input: one unnamed frame for a file, the sorted
/// `.txt` stems for a directory.
#[derive(Debug, Clone)]
pub struct Frames {
    pub stems: Vec<Option<String>>,
}

impl Frames {
    pub fn discover(primary: &Path) -> CliResult<Self> {
        if !primary.is_dir() {
            if !primary.exists() {
                return Err(CliError::io(primary, "no such file or directory"));
            }
            return Ok(Self { stems: vec![None] });
        }
        let mut stems: Vec<String> = std::fs::read_dir(primary)
            .map_err(|e| CliError::io(primary, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".txt")).map(str::to_string))
            .collect();
        stems.sort();
        Ok(Self {
            stems: stems.into_iter().map(Some).collect(),
        })
    }

    pub fn is_dir(&self) -> bool {
        self.stems.first().is_some_and(|s| s.is_some())
    }

    /// Label shown in warnings.
    pub fn label(stem: &Option<String>) -> &str {
        stem.as_deref().unwrap_or("input")
    }
}

/// `base/<stem>.<ext>` in directory mode, `base` itself otherwise.
pub fn frame_path(base: &Path, stem: &Option<String>, ext: &str) -> PathBuf {
    match stem {
        Some(s) => base.join(format!("{s}.{ext}")),
        None => base.to_path_buf(),
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_bytes(path, text.as_bytes())
}

/// 8-bit PNG to linear `[0, 1]` RGB by `/ 255`, origin at the image corner.
pub fn load_png(path: &Path) -> CliResult<ImagePatch> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(e) => CliError::io(path, e),
            other => CliError::new(Category::Input, format!("{}: {other}", path.display())),
        })?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img
        .pixels()
        .map(|p| p.0.map(|c| f64::from(c) / 255.0))
        .collect();
    Ok(ImagePatch::new(w as usize, h as usize, (0, 0), data)?)
}

pub fn save_png(path: &Path, patch: &ImagePatch) -> CliResult<()> {
    let bytes: Vec<u8> = patch
        .data()
        .iter()
        .flat_map(|p| p.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    let img = image::RgbImage::from_raw(patch.width() as u32, patch.height() as u32, bytes)
        .expect("buffer matches patch size");
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| CliError::io(path, e))
}

pub fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => PipelineConfig::from_toml(&read_text(p)?).map_err(|e| CliError::from(e).in_file(p)),
    }
}
