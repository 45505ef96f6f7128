//! Suite documents consumed by `synth` and `bench`: pattern sources (files
//! or procedural generators) plus scene specs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use shelfscan_core::aggregation::window_size;
use shelfscan_core::evalkit::{synth_pattern, GroundTruth, SceneSpec};
use shelfscan_core::imagecore::{read_image, RasterImage};

use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedPattern {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

/// A pattern either loaded from disk or generated procedurally.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternSource {
    pub id: String,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub generate: Option<GeneratedPattern>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub patterns: Vec<PatternSource>,
    pub scenes: Vec<SceneSpec>,
    /// Truth-matching radius; defaults to the detection window size of the
    /// largest pattern.
    #[serde(default)]
    pub match_radius: Option<f64>,
    /// Detect all suite patterns in every scene instead of only the planted
    /// ones (used for absent-pattern runs).
    #[serde(default)]
    pub detect_all_patterns: bool,
    /// Patterns to search even when absent (overrides the per-scene planted
    /// set when non-empty).
    #[serde(default)]
    pub detect_patterns: Vec<String>,
}

impl SuiteSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let spec: SuiteSpec =
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.scenes.is_empty() {
            return Err(CliError::Config("suite lists no scenes".into()));
        }
        if self.patterns.is_empty() {
            return Err(CliError::Config("suite lists no patterns".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.patterns {
            if !seen.insert(&p.id) {
                return Err(CliError::Config(format!("duplicate pattern id '{}'", p.id)));
            }
            match (&p.path, &p.generate) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(CliError::Config(format!(
                        "pattern '{}' needs exactly one of 'path' or 'generate'",
                        p.id
                    )))
                }
            }
        }
        for s in &self.scenes {
            s.validate()
                .map_err(|e| CliError::Config(format!("scene '{}': {e}", s.scene_id)))?;
            for id in &s.pattern_ids {
                if !self.patterns.iter().any(|p| &p.id == id) {
                    return Err(CliError::Config(format!(
                        "scene '{}' references unknown pattern '{}'",
                        s.scene_id, id
                    )));
                }
            }
        }
        for id in &self.detect_patterns {
            if !self.patterns.iter().any(|p| &p.id == id) {
                return Err(CliError::Config(format!(
                    "detect_patterns references unknown pattern '{id}'"
                )));
            }
        }
        Ok(())
    }

    pub fn materialize_patterns(&self) -> Result<BTreeMap<String, RasterImage>, CliError> {
        let mut out = BTreeMap::new();
        for p in &self.patterns {
            let img = match (&p.path, &p.generate) {
                (Some(path), None) => read_image(Path::new(path))
                    .map_err(|e| CliError::Input(format!("{path}: {e}")))?,
                (None, Some(gen)) => synth_pattern(gen.seed, gen.width, gen.height),
                _ => unreachable!("validated"),
            };
            out.insert(p.id.clone(), img);
        }
        Ok(out)
    }

    /// Product ids searched in a scene: an explicit list when given, all
    /// suite patterns when `detect_all_patterns`, otherwise the planted ones.
    pub fn products_for(&self, scene: &SceneSpec, truth: &GroundTruth) -> Vec<String> {
        if !self.detect_patterns.is_empty() {
            return self.detect_patterns.clone();
        }
        if self.detect_all_patterns {
            return self.patterns.iter().map(|p| p.id.clone()).collect();
        }
        let mut ids: Vec<String> = truth
            .placements
            .iter()
            .map(|p| p.pattern_id.clone())
            .collect();
        if ids.is_empty() {
            ids = scene.pattern_ids.clone();
        }
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn match_radius_for(&self, patterns: &BTreeMap<String, RasterImage>) -> f64 {
        if let Some(r) = self.match_radius {
            return r;
        }
        patterns
            .values()
            .map(|img| window_size(img.width().max(img.height())))
            .max()
            .unwrap_or(3) as f64
    }
}
