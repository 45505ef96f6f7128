//! Engine configuration: one document covering matching, cascade,
//! pipeline, extractor and debug settings. Unknown keys are rejected and
//! basic invariants are validated on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::ExtractorConfig;
use crate::filtercascade::CascadeConfig;
use crate::matching::MatchConfig;
use crate::pipeline::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DebugConfig {
    /// Blur applied to dumped vote images; <= 0 disables the blur.
    pub vote_image_sigma: f64,
    /// When set, every pattern entry's vote image is written here as
    /// `<product>_<phase>_<step>.png`.
    pub vote_image_dir: Option<String>,
}

impl Default for DebugConfig {
    fn default() -> Self {
        DebugConfig {
            vote_image_sigma: 2.0,
            vote_image_dir: None,
        }
    }
}

/// Complete engine configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub matching: MatchConfig,
    pub cascade: CascadeConfig,
    pub pipeline: PipelineConfig,
    pub extractor: ExtractorConfig,
    pub debug: DebugConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.matching;
        if !(m.scale_quotient_min < m.scale_quotient_max) {
            return Err(ConfigError::Invalid(
                "scale_quotient_min must be below scale_quotient_max".into(),
            ));
        }
        if m.scale_quotient_min <= 0.0 {
            return Err(ConfigError::Invalid("scale quotient range must be positive".into()));
        }
        if m.hue_threshold <= 0.0 {
            return Err(ConfigError::Invalid("hue_threshold must be positive".into()));
        }
        if m.ann_trees == 0 || m.ann_checks == 0 {
            return Err(ConfigError::Invalid("ann_trees and ann_checks must be positive".into()));
        }
        let c = &self.cascade;
        if c.adjacency_divisor <= 0.0 {
            return Err(ConfigError::Invalid("adjacency_divisor must be positive".into()));
        }
        if !(c.hamming_reject_frac > 0.0 && c.hamming_reject_frac <= 1.0) {
            return Err(ConfigError::Invalid(
                "hamming_reject_frac must be in (0, 1]".into(),
            ));
        }
        if !(c.ncc_threshold >= 0.0 && c.ncc_threshold < 1.0) {
            return Err(ConfigError::Invalid("ncc_threshold must be in [0, 1)".into()));
        }
        if c.ncc_patch == 0 {
            return Err(ConfigError::Invalid("ncc_patch must be positive".into()));
        }
        if c.scale_var_factor <= 0.0 || c.rot_var_factor <= 0.0 {
            return Err(ConfigError::Invalid("variance factors must be positive".into()));
        }
        let p = &self.pipeline;
        if p.min_dim == 0 {
            return Err(ConfigError::Invalid("min_dim must be positive".into()));
        }
        if !(p.shrink > 0.0 && p.shrink <= 1.0) {
            return Err(ConfigError::Invalid("shrink must be in (0, 1]".into()));
        }
        if !(p.iou_threshold > 0.0 && p.iou_threshold <= 1.0) {
            return Err(ConfigError::Invalid("iou_threshold must be in (0, 1]".into()));
        }
        if p.max_propositions == 0 {
            return Err(ConfigError::Invalid("max_propositions must be positive".into()));
        }
        if !(p.quality > 0.0 && p.quality <= 1.0) {
            return Err(ConfigError::Invalid("quality must be in (0, 1]".into()));
        }
        let e = &self.extractor;
        if e.octaves == 0 || e.scales_per_octave == 0 {
            return Err(ConfigError::Invalid(
                "octaves and scales_per_octave must be positive".into(),
            ));
        }
        if e.contrast_threshold <= 0.0 {
            return Err(ConfigError::Invalid("contrast_threshold must be positive".into()));
        }
        Ok(())
    }

    /// Load and validate a JSON config. Missing keys take defaults; unknown
    /// keys are errors.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text)?;
        Ok(())
    }
}
