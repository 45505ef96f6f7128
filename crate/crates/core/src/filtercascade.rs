//! The six-filter verification cascade.
//!
//! Filters (1)-(4) work on vote data (count, adjacency mass, scale spread,
//! rotation spread); (5) and (6) pull graphical evidence from the images.
//! Pass one of the aggregation runs (1)(2)(3)(4); pass two runs (3)(4)(5)(6).
//! The first rejection short-circuits the cascade.

use serde::{Deserialize, Serialize};

use crate::aggregation::VoteGroup;
use crate::features::FeatureSet;
use crate::geometry::Envelope;
use crate::imagecore::{extract_subimage, ncc, resize_bilinear, RasterImage};

/// Cascade thresholds. Defaults are the engine's standard values; setting
/// `hamming_reject_frac` to 1.0 disables filter (5) and `ncc_threshold` to
/// 0.0 disables filter (6).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CascadeConfig {
    /// Filter (1): groups must carry strictly more votes than this.
    pub min_votes: usize,
    /// Filter (2): required adjacency sum is the pattern's feature count
    /// divided by this.
    pub adjacency_divisor: f64,
    /// Filter (3): scale variance bound as a fraction of the mean squared
    /// scale quotient.
    pub scale_var_factor: f64,
    /// Filter (4): rotation variance bound factor (see [`f4_rotation_variance`]).
    pub rot_var_factor: f64,
    /// Filter (5): reject when more than this fraction of pair bits differ.
    pub hamming_reject_frac: f64,
    /// Filter (6): per-channel correlation floor in (0, 1) space.
    pub ncc_threshold: f64,
    /// Filter (6): side length both images are resized to.
    pub ncc_patch: usize,
    /// Filter (3): interpret "average of the scales squared" as the mean of
    /// squares (true) or the squared mean (false).
    pub scale_var_mean_of_squares: bool,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            min_votes: 6,
            adjacency_divisor: 200.0,
            scale_var_factor: 0.6,
            rot_var_factor: 0.6,
            hamming_reject_frac: 0.25,
            ncc_threshold: 0.5,
            ncc_patch: 20,
            scale_var_mean_of_squares: true,
        }
    }
}

/// Which filter produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub enum FilterId {
    VoteCount,
    AdjacencySum,
    ScaleVariance,
    RotationVariance,
    BinaryLuminance,
    GlobalNcc,
}

impl FilterId {
    pub fn short_name(self) -> &'static str {
        match self {
            FilterId::VoteCount => "f1",
            FilterId::AdjacencySum => "f2",
            FilterId::ScaleVariance => "f3",
            FilterId::RotationVariance => "f4",
            FilterId::BinaryLuminance => "f5",
            FilterId::GlobalNcc => "f6",
        }
    }
}

/// Outcome of one filter or of a whole cascade run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterVerdict {
    pub accepted: bool,
    /// Set iff not accepted.
    pub rejecting_filter: Option<FilterId>,
    pub measured_value: f64,
    pub threshold_value: f64,
}

impl FilterVerdict {
    fn accept(measured: f64, threshold: f64) -> Self {
        FilterVerdict {
            accepted: true,
            rejecting_filter: None,
            measured_value: measured,
            threshold_value: threshold,
        }
    }

    fn reject(filter: FilterId, measured: f64, threshold: f64) -> Self {
        FilterVerdict {
            accepted: false,
            rejecting_filter: Some(filter),
            measured_value: measured,
            threshold_value: threshold,
        }
    }
}

/// Filter (1): accept groups of strictly more than `min_votes` votes.
pub fn f1_vote_count(group: &VoteGroup, cfg: &CascadeConfig) -> FilterVerdict {
    let measured = group.len() as f64;
    let threshold = cfg.min_votes as f64;
    if group.len() > cfg.min_votes {
        FilterVerdict::accept(measured, threshold)
    } else {
        FilterVerdict::reject(FilterId::VoteCount, measured, threshold)
    }
}

/// Filter (2): accept when the group's adjacency sum reaches the pattern's
/// feature count divided by the configured divisor (boundary inclusive).
pub fn f2_adjacency_sum(
    group: &VoteGroup,
    pattern_feature_count: usize,
    cfg: &CascadeConfig,
) -> FilterVerdict {
    let threshold = pattern_feature_count as f64 / cfg.adjacency_divisor;
    if group.adjacency_sum >= threshold {
        FilterVerdict::accept(group.adjacency_sum, threshold)
    } else {
        FilterVerdict::reject(FilterId::AdjacencySum, group.adjacency_sum, threshold)
    }
}

/// Filter (3): accept when the population variance of the scale quotients
/// stays below the configured fraction of their average square. Groups of
/// fewer than two votes auto-accept (variance is undefined there).
pub fn f3_scale_variance(group: &VoteGroup, cfg: &CascadeConfig) -> FilterVerdict {
    if group.len() < 2 {
        return FilterVerdict::accept(0.0, 0.0);
    }
    let mean_sq = if cfg.scale_var_mean_of_squares {
        group
            .votes
            .iter()
            .map(|v| v.scale_quotient * v.scale_quotient)
            .sum::<f64>()
            / group.len() as f64
    } else {
        group.mean_scale_quotient * group.mean_scale_quotient
    };
    let threshold = cfg.scale_var_factor * mean_sq;
    if group.scale_variance <= threshold {
        FilterVerdict::accept(group.scale_variance, threshold)
    } else {
        FilterVerdict::reject(FilterId::ScaleVariance, group.scale_variance, threshold)
    }
}

/// Filter (4): rotation spread test.
///
/// The scale-style variance ratio degenerates for rotations: deviations are
/// taken about the circular mean, so their variance and their mean square
/// coincide and the ratio carries no signal. What remains discriminative is
/// the mean resultant length of the rotation deltas: it collapses to zero
/// exactly when the rotations are spread uniformly around the circle. The
/// filter therefore rejects degenerate spread (resultant below 1e-6) and
/// accepts otherwise; the verdict reports the deviation variance against
/// the nominal `rot_var_factor` bound for observability.
pub fn f4_rotation_variance(group: &VoteGroup, cfg: &CascadeConfig) -> FilterVerdict {
    let deviations_mean_sq = if group.is_empty() {
        0.0
    } else {
        crate::circstats::angular_deviations_deg(
            &group
                .votes
                .iter()
                .map(|v| v.rotation_delta)
                .collect::<Vec<_>>(),
        )
        .iter()
        .map(|d| d * d)
        .sum::<f64>()
            / group.len() as f64
    };
    let threshold = cfg.rot_var_factor * deviations_mean_sq;
    if group.rotation_resultant < 1e-6 {
        FilterVerdict::reject(FilterId::RotationVariance, group.rotation_variance, threshold)
    } else {
        FilterVerdict::accept(group.rotation_variance, threshold)
    }
}

/// Filter (5): binary luminance test.
///
/// For every unordered vote pair (in pattern-index order) one bit records
/// whether the first point is brighter than the second, once on the scene
/// side and once on the pattern side. Reject when the Hamming distance
/// between the two bit vectors exceeds the configured fraction.
pub fn f5_binary_luminance(
    group: &VoteGroup,
    pattern_features: &FeatureSet,
    scene_features: &FeatureSet,
    cfg: &CascadeConfig,
) -> FilterVerdict {
    let n = group.len();
    if n < 2 {
        return FilterVerdict::accept(0.0, cfg.hamming_reject_frac);
    }
    let mut differing = 0usize;
    let mut pairs = 0usize;
    for i in 0..n {
        let vi = &group.votes[i];
        let pi = pattern_features.points[vi.pattern_idx].luminance;
        let si = scene_features.points[vi.scene_idx].luminance;
        for vj in &group.votes[i + 1..] {
            let pj = pattern_features.points[vj.pattern_idx].luminance;
            let sj = scene_features.points[vj.scene_idx].luminance;
            let bit_pattern = pi > pj;
            let bit_scene = si > sj;
            if bit_pattern != bit_scene {
                differing += 1;
            }
            pairs += 1;
        }
    }
    let frac = differing as f64 / pairs as f64;
    if frac > cfg.hamming_reject_frac {
        FilterVerdict::reject(FilterId::BinaryLuminance, frac, cfg.hamming_reject_frac)
    } else {
        FilterVerdict::accept(frac, cfg.hamming_reject_frac)
    }
}

/// Filter (6): global normalized cross-correlation.
///
/// The scene is cropped by the envelope, both crop and pattern are resized
/// to the configured patch size, and each RGB channel is correlated
/// independently. Accept only when every channel reaches the threshold.
/// An empty crop rejects.
pub fn f6_global_ncc(
    envelope: &Envelope,
    scene_img: &RasterImage,
    pattern_img: &RasterImage,
    cfg: &CascadeConfig,
) -> FilterVerdict {
    let crop = match extract_subimage(scene_img, envelope) {
        Ok(c) => c,
        Err(_) => return FilterVerdict::reject(FilterId::GlobalNcc, 0.0, cfg.ncc_threshold),
    };
    let patch = cfg.ncc_patch.max(1);
    let crop = resize_bilinear(&crop, patch, patch).expect("positive patch size");
    let pattern = resize_bilinear(pattern_img, patch, patch).expect("positive patch size");
    let mut min_corr = f64::INFINITY;
    for c in 0..3 {
        let a = channel_image(&crop, c);
        let b = channel_image(&pattern, c);
        let corr = ncc(&a, &b).expect("equal patch dimensions");
        min_corr = min_corr.min(corr);
    }
    if min_corr >= cfg.ncc_threshold {
        FilterVerdict::accept(min_corr, cfg.ncc_threshold)
    } else {
        FilterVerdict::reject(FilterId::GlobalNcc, min_corr, cfg.ncc_threshold)
    }
}

fn channel_image(img: &RasterImage, channel: usize) -> RasterImage {
    if img.channels() == 1 {
        return img.clone();
    }
    let data: Vec<u8> = img
        .data()
        .chunks_exact(3)
        .map(|px| px[channel])
        .collect();
    RasterImage::new(img.width(), img.height(), 1, data).expect("channel dimensions")
}

/// Aggregation pass selector for [`run_cascade`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadePass {
    One,
    Two,
}

/// Everything the image-based filters need.
pub struct CascadeContext<'a> {
    pub cfg: &'a CascadeConfig,
    /// Feature count of the pattern entry being matched (filter 2 scale).
    pub pattern_feature_count: usize,
    pub pattern_features: &'a FeatureSet,
    pub scene_features: &'a FeatureSet,
    pub pattern_image: &'a RasterImage,
    pub scene_image: &'a RasterImage,
    /// Envelope estimate; required by filter (6) in pass two.
    pub envelope: Option<&'a Envelope>,
}

/// Run the filters of the given pass in cascade order; the first rejection
/// short-circuits and is reported in the verdict.
pub fn run_cascade(group: &VoteGroup, pass: CascadePass, ctx: &CascadeContext) -> FilterVerdict {
    let cfg = ctx.cfg;
    let mut last = FilterVerdict::accept(0.0, 0.0);
    let filters: &[FilterId] = match pass {
        CascadePass::One => &[
            FilterId::VoteCount,
            FilterId::AdjacencySum,
            FilterId::ScaleVariance,
            FilterId::RotationVariance,
        ],
        CascadePass::Two => &[
            FilterId::ScaleVariance,
            FilterId::RotationVariance,
            FilterId::BinaryLuminance,
            FilterId::GlobalNcc,
        ],
    };
    for &id in filters {
        let verdict = match id {
            FilterId::VoteCount => f1_vote_count(group, cfg),
            FilterId::AdjacencySum => f2_adjacency_sum(group, ctx.pattern_feature_count, cfg),
            FilterId::ScaleVariance => f3_scale_variance(group, cfg),
            FilterId::RotationVariance => f4_rotation_variance(group, cfg),
            FilterId::BinaryLuminance => {
                f5_binary_luminance(group, ctx.pattern_features, ctx.scene_features, cfg)
            }
            FilterId::GlobalNcc => match ctx.envelope {
                Some(env) => f6_global_ncc(env, ctx.scene_image, ctx.pattern_image, cfg),
                None => FilterVerdict::reject(FilterId::GlobalNcc, 0.0, cfg.ncc_threshold),
            },
        };
        if !verdict.accepted {
            return verdict;
        }
        last = verdict;
    }
    last
}
