//! Tunables loaded from a TOML `key = value` file. Every key is optional and
//! falls back to the built-in default.
//!
//! ```toml
//! [solver]
//! max_iterations = 50
//! [align]
//! coarse_step = 0.5
//! oob_penalty = 3.0
//! [codec]
//! positive_iou = 0.7
//! dimension_prior = { w = 1.6, l = 3.9, h = 1.56 }
//! [eval]
//! interpolation = "Eleven"
//! [render]
//! texture_frequency = 4.0
//! ```

use serde::{Deserialize, Serialize};

use crate::align::AlignConfig;
use crate::codec::CodecConfig;
use crate::error::{Error, Result};
use crate::estimator::SolverConfig;
use crate::eval::{ApInterpolation, DEPTH_BIN_HALF_WIDTH, DEPTH_CURVE_CENTERS, DEPTH_CURVE_MIN_IOU};
use crate::synth::RenderConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub class: String,
    pub interpolation: ApInterpolation,
    pub depth_bin_centers: Vec<f64>,
    pub depth_bin_half_width: f64,
    pub depth_min_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            class: "Car".into(),
            interpolation: ApInterpolation::Eleven,
            depth_bin_centers: DEPTH_CURVE_CENTERS.to_vec(),
            depth_bin_half_width: DEPTH_BIN_HALF_WIDTH,
            depth_min_iou: DEPTH_CURVE_MIN_IOU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    pub align: AlignConfig,
    /// Run dense alignment before rectifying.
    pub alignment: bool,
    pub codec: CodecConfig,
    pub eval: EvalConfig,
    pub render: RenderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            align: AlignConfig::default(),
            alignment: true,
            codec: CodecConfig::default(),
            eval: EvalConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        let s = &self.solver;
        if s.max_iterations == 0 || !(s.damping_factor > 1.0) || !(s.initial_damping > 0.0) {
            return bad("solver needs max_iterations > 0, damping_factor > 1, initial_damping > 0");
        }
        let a = &self.align;
        if !(a.coarse_step > 0.0 && a.fine_step > 0.0) || a.coarse_count == 0 || a.fine_count == 0 {
            return bad("alignment steps and counts must be positive");
        }
        let c = &self.codec;
        if !(c.negative_iou <= c.positive_iou && c.background_iou_min <= c.foreground_iou) {
            return bad("codec thresholds are out of order");
        }
        if !(c.dimension_prior.w > 0.0 && c.dimension_prior.l > 0.0 && c.dimension_prior.h > 0.0) {
            return Err(Error::NonPositiveDimension);
        }
        if self.render.supersample == 0 {
            return bad("render.supersample must be >= 1");
        }
        Ok(())
    }

    pub fn rectify(&self) -> crate::align::RectifyConfig {
        crate::align::RectifyConfig {
            alignment: self.alignment,
            align: self.align,
            solver: self.solver,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = PipelineConfig::default();
        c.align.oob_penalty = 2.5;
        c.eval.interpolation = ApInterpolation::Forty;
        c.codec.dimension_prior.l = 4.2;
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_override() {
        let c = PipelineConfig::from_toml("[align]\nfine_step = 0.02\n").unwrap();
        assert_eq!(c.align.fine_step, 0.02);
        assert_eq!(c.align.coarse_step, AlignConfig::default().coarse_step);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(PipelineConfig::from_toml("[align]\nbogus = 1\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::from_toml("[align]\ncoarse_step = -1.0\n"), Err(Error::Config(_))));
    }
}
