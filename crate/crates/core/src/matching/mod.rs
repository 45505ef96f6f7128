//! Correspondence filtering and vote construction.
//!
//! Scene features are matched against an index over the pattern's
//! descriptors. Matches pass a distance threshold (midpoint of the observed
//! distance range), a color filter and a scale-quotient gate; survivors
//! become votes whose weight is the adjacency transform of the descriptor
//! distance.
//!
//! Each vote is anchored at the object-center position it implies: the
//! scene feature's position pulled back by the matched pattern feature's
//! offset from the pattern center, scaled by the quotient and turned by the
//! rotation difference. Votes from correct correspondences therefore pile
//! up within a few pixels of the true object center, while mismatches
//! scatter; that concentration is what the vote image's local maxima and
//! the small aggregation windows rely on.

mod index;

use serde::{Deserialize, Serialize};

use crate::circstats::wrap_deg_180;
use crate::features::FeatureSet;
use crate::imagecore::ColorSample;

pub use index::{DescriptorIndex, EmptyIndexError};

/// One accepted feature correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub pattern_idx: usize,
    pub scene_idx: usize,
    /// L2 distance between the matched descriptors.
    pub descriptor_distance: f64,
    /// `1 - (distance / threshold)^2`, in (0, 1].
    pub adjacency: f64,
    /// scene feature scale / pattern feature scale
    pub scale_quotient: f64,
    /// scene orientation minus pattern orientation, wrapped to [-180, 180)
    pub rotation_delta: f64,
    /// Scene-plane position this correspondence votes for: the implied
    /// object center. May fall outside the scene for bad matches.
    pub scene_x: f64,
    pub scene_y: f64,
}

/// Matching parameters. Defaults carry the engine's standard values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MatchConfig {
    /// Open interval of accepted scene/pattern scale quotients.
    pub scale_quotient_min: f64,
    pub scale_quotient_max: f64,
    /// Maximum circular hue difference in degrees when the color filter is
    /// active.
    pub hue_threshold: f64,
    /// Lightness range (0-255 scale) in which the color filter applies.
    pub lightness_min: f64,
    pub lightness_max: f64,
    /// Minimum spread between RGB channels for a point to count as
    /// chromatic.
    pub rgb_spread_min: u8,
    pub ann_trees: usize,
    pub ann_checks: usize,
    /// Use exhaustive nearest-neighbor search instead of the randomized
    /// forest. Mandatory for reproducible test runs.
    pub exact_nn: bool,
    /// Seed for the randomized tree construction.
    pub ann_seed: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            scale_quotient_min: 0.75,
            scale_quotient_max: 1.5,
            hue_threshold: 45.0,
            lightness_min: 10.0,
            lightness_max: 240.0,
            rgb_spread_min: 10,
            ann_trees: 4,
            ann_checks: 128,
            exact_nn: false,
            ann_seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error(transparent)]
    EmptyIndex(#[from] EmptyIndexError),
    #[error("distance threshold needs at least one match")]
    NoMatches,
}

/// A raw nearest-neighbor correspondence before any filtering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawMatch {
    pub scene_idx: usize,
    pub pattern_idx: usize,
    pub descriptor_distance: f64,
}

/// Build the descriptor index over a pattern's features.
pub fn build_index(
    pattern_features: &FeatureSet,
    cfg: &MatchConfig,
) -> Result<DescriptorIndex, MatchError> {
    let descs: Vec<Vec<f32>> = pattern_features
        .points
        .iter()
        .map(|p| p.descriptor.clone())
        .collect();
    Ok(DescriptorIndex::build(
        descs,
        cfg.ann_trees,
        cfg.ann_checks,
        cfg.exact_nn,
        cfg.ann_seed,
    )?)
}

/// One candidate match per scene feature: its (approximate) nearest pattern
/// descriptor. No filtering happens here.
pub fn match_descriptors(scene: &FeatureSet, index: &DescriptorIndex) -> Vec<RawMatch> {
    scene
        .points
        .iter()
        .enumerate()
        .map(|(scene_idx, p)| {
            let (pattern_idx, descriptor_distance) = index.nearest(&p.descriptor);
            RawMatch {
                scene_idx,
                pattern_idx,
                descriptor_distance,
            }
        })
        .collect()
}

/// Midpoint of the lowest and highest distance in the match set.
pub fn distance_threshold(matches: &[RawMatch]) -> Result<f64, MatchError> {
    if matches.is_empty() {
        return Err(MatchError::NoMatches);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for m in matches {
        min = min.min(m.descriptor_distance);
        max = max.max(m.descriptor_distance);
    }
    Ok((min + max) / 2.0)
}

/// Hue-difference rejection. Active only when both points are chromatic
/// (RGB spread above the minimum) and of mid lightness; inactive pairs are
/// kept.
pub fn color_filter(pattern: &ColorSample, scene: &ColorSample, cfg: &MatchConfig) -> bool {
    let chromatic = |c: &ColorSample| {
        let spread = c.r.max(c.g).max(c.b) - c.r.min(c.g).min(c.b);
        spread > cfg.rgb_spread_min && c.l >= cfg.lightness_min && c.l <= cfg.lightness_max
    };
    if !chromatic(pattern) || !chromatic(scene) {
        return true;
    }
    let diff = (pattern.h - scene.h).abs();
    let circular = diff.min(360.0 - diff);
    circular <= cfg.hue_threshold
}

/// Adjacency transform of a descriptor distance: `1 - (dist / thr)^2`.
#[inline]
pub fn adjacency(distance: f64, threshold: f64) -> f64 {
    1.0 - (distance / threshold) * (distance / threshold)
}

/// Full vote pipeline: match, distance-threshold, color filter, scale gate,
/// adjacency weighting. Empty inputs yield an empty vote list.
pub fn make_votes(scene: &FeatureSet, pattern: &FeatureSet, cfg: &MatchConfig) -> Vec<Vote> {
    if scene.is_empty() || pattern.is_empty() {
        return Vec::new();
    }
    let index = build_index(pattern, cfg).expect("non-empty pattern");
    let matches = match_descriptors(scene, &index);
    votes_from_matches(&matches, scene, pattern, cfg)
}

/// Vote construction from precomputed raw matches; lets callers reuse one
/// index across calls.
pub fn votes_from_matches(
    matches: &[RawMatch],
    scene: &FeatureSet,
    pattern: &FeatureSet,
    cfg: &MatchConfig,
) -> Vec<Vote> {
    let thr = match distance_threshold(matches) {
        Ok(t) => t,
        Err(_) => return Vec::new(),
    };
    let pattern_cx = pattern.image_w as f64 / 2.0;
    let pattern_cy = pattern.image_h as f64 / 2.0;
    let mut votes = Vec::new();
    for m in matches {
        if !(m.descriptor_distance < thr) {
            continue;
        }
        let sp = &scene.points[m.scene_idx];
        let pp = &pattern.points[m.pattern_idx];
        if !color_filter(&pp.color, &sp.color, cfg) {
            continue;
        }
        let quotient = sp.scale / pp.scale;
        if !(quotient > cfg.scale_quotient_min && quotient < cfg.scale_quotient_max) {
            continue;
        }
        let rotation_delta = wrap_deg_180(sp.orientation - pp.orientation);
        // implied object center: undo the pattern feature's offset from the
        // pattern center under the match's scale and rotation. Orientations
        // are measured y-up while pixel offsets are y-down, so the in-image
        // turn is the negated delta.
        let theta = (-rotation_delta).to_radians();
        let (sin_t, cos_t) = theta.sin_cos();
        let off_x = pp.x - pattern_cx;
        let off_y = pp.y - pattern_cy;
        let scene_x = sp.x - quotient * (off_x * cos_t - off_y * sin_t);
        let scene_y = sp.y - quotient * (off_x * sin_t + off_y * cos_t);
        votes.push(Vote {
            pattern_idx: m.pattern_idx,
            scene_idx: m.scene_idx,
            descriptor_distance: m.descriptor_distance,
            adjacency: adjacency(m.descriptor_distance, thr),
            scale_quotient: quotient,
            rotation_delta,
            scene_x,
            scene_y,
        });
    }
    votes
}
