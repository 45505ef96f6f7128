//! Full detection orchestration for one or more products against a scene:
//! pattern size cascade, the per-pattern proposition loop (aggregate,
//! cascade, erase), the two-phase detect-extract-redetect protocol and the
//! consolidation stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate_pass1, aggregate_pass2, estimate_envelope, window_size,
};
use crate::config::RunConfig;
use crate::features::{extract_features, FeatureSet};
use crate::filtercascade::{
    f1_vote_count, run_cascade, CascadeContext, CascadePass, FilterId,
};
use crate::geometry::{iou_aabb, Envelope};
use crate::imagecore::{extract_subimage, resize_bilinear, RasterImage};
use crate::matching::{build_index, match_descriptors, votes_from_matches};
use crate::votespace::accumulate;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("at least one pattern is required")]
    NoPatterns,
}

/// Orchestration tunables not covered by the per-filter configs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Size cascade stops before an entry's larger dimension would drop
    /// below this.
    pub min_dim: usize,
    /// Envelope shrink factor constraining the pass-two flood fill.
    pub shrink: f64,
    /// Bounding-box IoU at or above which detections count as overlapping.
    pub iou_threshold: f64,
    /// Upper bound on propositions processed per pattern entry.
    pub max_propositions: usize,
    /// Relative quality floor for proposition detection.
    pub quality: f64,
    /// Run the second detection phase with a scene-extracted pattern.
    pub two_phase: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            min_dim: 100,
            shrink: 0.8,
            iou_threshold: 0.5,
            max_propositions: 64,
            quality: 0.01,
            two_phase: true,
        }
    }
}

/// A pattern image with its features; either a registered product (step 0),
/// a resized derivative, or a phase-two pattern extracted from the scene.
#[derive(Debug, Clone)]
pub struct PatternEntry {
    pub pattern_id: String,
    pub image: RasterImage,
    pub features: FeatureSet,
    pub parent_id: Option<String>,
    pub scale_step: u32,
}

impl PatternEntry {
    /// Register a product pattern: extracts features with the given config.
    pub fn register(pattern_id: &str, image: RasterImage, cfg: &RunConfig) -> Self {
        let mut features = extract_features(&image, &cfg.extractor);
        features.source_id = pattern_id.to_string();
        PatternEntry {
            pattern_id: pattern_id.to_string(),
            image,
            features,
            parent_id: None,
            scale_step: 0,
        }
    }

    /// Register a product with externally supplied features.
    pub fn with_features(pattern_id: &str, image: RasterImage, features: FeatureSet) -> Self {
        PatternEntry {
            pattern_id: pattern_id.to_string(),
            image,
            features,
            parent_id: None,
            scale_step: 0,
        }
    }
}

/// A scene image with its features, extracted once and shared by every
/// pattern and phase.
#[derive(Debug, Clone)]
pub struct SceneContext {
    pub scene_id: String,
    pub image: RasterImage,
    pub features: FeatureSet,
}

impl SceneContext {
    pub fn prepare(scene_id: &str, image: RasterImage, cfg: &RunConfig) -> Self {
        let mut features = extract_features(&image, &cfg.extractor);
        features.source_id = scene_id.to_string();
        SceneContext {
            scene_id: scene_id.to_string(),
            image,
            features,
        }
    }

    pub fn with_features(scene_id: &str, image: RasterImage, features: FeatureSet) -> Self {
        SceneContext {
            scene_id: scene_id.to_string(),
            image,
            features,
        }
    }
}

/// An accepted detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "OccurrenceJson", into = "OccurrenceJson")]
pub struct Occurrence {
    pub pattern_id: String,
    pub envelope: Envelope,
    pub adjacency_sum: f64,
    /// Adjacency sum divided by the feature count of the original
    /// (unresized) pattern.
    pub normalized_adjacency: f64,
    pub phase: u8,
    pub vote_count: usize,
}

#[derive(Serialize, Deserialize)]
struct OccurrenceJson {
    pattern: String,
    center: [f64; 2],
    size: [f64; 2],
    rotation: f64,
    adjacency_sum: f64,
    normalized_adjacency: f64,
    phase: u8,
    votes: usize,
}

impl From<Occurrence> for OccurrenceJson {
    fn from(o: Occurrence) -> Self {
        OccurrenceJson {
            pattern: o.pattern_id,
            center: [o.envelope.center_x, o.envelope.center_y],
            size: [o.envelope.width, o.envelope.height],
            rotation: o.envelope.rotation,
            adjacency_sum: o.adjacency_sum,
            normalized_adjacency: o.normalized_adjacency,
            phase: o.phase,
            votes: o.vote_count,
        }
    }
}

impl From<OccurrenceJson> for Occurrence {
    fn from(j: OccurrenceJson) -> Self {
        Occurrence {
            pattern_id: j.pattern,
            envelope: Envelope::new(j.center[0], j.center[1], j.size[0], j.size[1], j.rotation),
            adjacency_sum: j.adjacency_sum,
            normalized_adjacency: j.normalized_adjacency,
            phase: j.phase,
            vote_count: j.votes,
        }
    }
}

/// Counters for one product's detection run.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ProductDiagnostics {
    /// Pattern entries processed (size cascade plus any phase-two entry).
    pub entries: usize,
    pub votes_made: usize,
    pub propositions_tried: usize,
    pub accepted: usize,
    /// Rejection tallies keyed by filter short name (f1..f6).
    pub rejections: BTreeMap<String, usize>,
}

impl ProductDiagnostics {
    fn absorb(&mut self, other: &ProductDiagnostics) {
        self.entries += other.entries;
        self.votes_made += other.votes_made;
        self.propositions_tried += other.propositions_tried;
        self.accepted += other.accepted;
        for (k, v) in &other.rejections {
            *self.rejections.entry(k.clone()).or_default() += v;
        }
    }

    fn tally_rejection(&mut self, filter: FilterId) {
        *self
            .rejections
            .entry(filter.short_name().to_string())
            .or_default() += 1;
    }
}

/// Result of a full multi-product run against one scene.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DetectionReport {
    #[serde(rename = "scene")]
    pub scene_id: String,
    pub occurrences: Vec<Occurrence>,
    pub diagnostics: BTreeMap<String, ProductDiagnostics>,
}

/// Build the size cascade for a pattern: scale steps 0, 1, 2, ... halving
/// each dimension (rounding down) while the next step's larger dimension
/// stays at or above `min_dim`. Features are re-extracted per entry.
pub fn build_size_cascade(
    base: &PatternEntry,
    min_dim: usize,
    cfg: &RunConfig,
) -> Vec<PatternEntry> {
    let mut entries = vec![base.clone()];
    loop {
        let last = entries.last().unwrap();
        let (w, h) = (last.image.width(), last.image.height());
        let next_larger = w.max(h) / 2;
        if next_larger < min_dim || w / 2 == 0 || h / 2 == 0 {
            break;
        }
        let image = resize_bilinear(&last.image, w / 2, h / 2).expect("halved dimensions");
        let step = last.scale_step + 1;
        let pattern_id = format!("{}#s{}", base.pattern_id, step);
        let mut features = extract_features(&image, &cfg.extractor);
        features.source_id = pattern_id.clone();
        entries.push(PatternEntry {
            pattern_id,
            image,
            features,
            parent_id: Some(base.pattern_id.clone()),
            scale_step: step,
        });
    }
    entries
}

/// Detection loop for one pattern entry: votes, propositions, two-pass
/// aggregation with cascade filtering, erasure between acceptances.
///
/// `product_id` labels emitted occurrences (detections of resized
/// derivatives and phase-two patterns report under their product);
/// `original_feature_count` is the feature count of the unresized pattern,
/// used for adjacency normalization.
pub fn detect_single_pattern(
    scene: &SceneContext,
    entry: &PatternEntry,
    cfg: &RunConfig,
    product_id: &str,
    original_feature_count: usize,
    phase: u8,
    diag: &mut ProductDiagnostics,
) -> Vec<Occurrence> {
    diag.entries += 1;
    if entry.features.is_empty() || scene.features.is_empty() {
        return Vec::new();
    }
    let index = build_index(&entry.features, &cfg.matching).expect("non-empty pattern features");
    let raw = match_descriptors(&scene.features, &index);
    let mut votes = votes_from_matches(&raw, &scene.features, &entry.features, &cfg.matching);
    // votes implying an object center outside the visible scene cannot be
    // bucketed; they belong to mismatches or truncated objects
    let (w_f, h_f) = (scene.image.width() as f64, scene.image.height() as f64);
    votes.retain(|v| v.scene_x >= 0.0 && v.scene_x < w_f && v.scene_y >= 0.0 && v.scene_y < h_f);
    diag.votes_made += votes.len();
    if votes.is_empty() {
        return Vec::new();
    }
    let mut vs = accumulate(&votes, scene.image.width(), scene.image.height())
        .expect("out-of-bounds votes were filtered");

    if let Some(dir) = &cfg.debug.vote_image_dir {
        let name = format!("{}_{}_{}.png", product_id, phase, entry.scale_step);
        let path = std::path::Path::new(dir).join(name);
        let _ = crate::imagecore::write_png(&vs.render_debug(cfg.debug.vote_image_sigma), &path);
    }

    let w = window_size(entry.image.width().max(entry.image.height()));
    let props = vs.detect_propositions(w, cfg.pipeline.quality);

    let ctx = CascadeContext {
        cfg: &cfg.cascade,
        pattern_feature_count: entry.features.len(),
        pattern_features: &entry.features,
        scene_features: &scene.features,
        pattern_image: &entry.image,
        scene_image: &scene.image,
        envelope: None,
    };

    let mut occurrences = Vec::new();
    for prop in props.iter().take(cfg.pipeline.max_propositions) {
        diag.propositions_tried += 1;
        let group1 = aggregate_pass1(&vs, prop, w);
        let verdict1 = run_cascade(&group1, CascadePass::One, &ctx);
        if !verdict1.accepted {
            diag.tally_rejection(verdict1.rejecting_filter.expect("rejected verdict"));
            continue;
        }
        let env1 = estimate_envelope(&group1, entry.image.width(), entry.image.height())
            .expect("pass-1 group accepted by f1 is non-empty");
        let group2 = aggregate_pass2(&vs, prop, &env1, w, cfg.pipeline.shrink);
        let env2 = estimate_envelope(&group2, entry.image.width(), entry.image.height())
            .unwrap_or(env1);
        let ctx2 = CascadeContext {
            envelope: Some(&env2),
            ..ctx
        };
        let verdict2 = run_cascade(&group2, CascadePass::Two, &ctx2);
        if !verdict2.accepted {
            diag.tally_rejection(verdict2.rejecting_filter.expect("rejected verdict"));
            continue;
        }
        // occurrences must carry more votes than filter (1) demands; a
        // pass-two group can shrink below that when the envelope is tight
        let recount = f1_vote_count(&group2, &cfg.cascade);
        if !recount.accepted {
            diag.tally_rejection(FilterId::VoteCount);
            continue;
        }
        let normalized = if original_feature_count == 0 {
            0.0
        } else {
            group2.adjacency_sum / original_feature_count as f64
        };
        occurrences.push(Occurrence {
            pattern_id: product_id.to_string(),
            envelope: env2,
            adjacency_sum: group2.adjacency_sum,
            normalized_adjacency: normalized,
            phase,
            vote_count: group2.len(),
        });
        diag.accepted += 1;
        vs.erase_region(&env2);
    }
    occurrences
}

fn cluster_by_overlap(
    occurrences: &[Occurrence],
    same_pattern: bool,
    iou_threshold: f64,
) -> Vec<Vec<usize>> {
    let n = occurrences.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for i in 0..n {
        for j in i + 1..n {
            if same_pattern && occurrences[i].pattern_id != occurrences[j].pattern_id {
                continue;
            }
            if iou_aabb(&occurrences[i].envelope, &occurrences[j].envelope) >= iou_threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }
    clusters.into_values().collect()
}

fn center_key(o: &Occurrence) -> (u64, u64) {
    (o.envelope.center_y.to_bits(), o.envelope.center_x.to_bits())
}

/// Merge overlapping detections (transitively, over the overlap graph).
///
/// With `same_pattern` set, overlapping occurrences of one product collapse
/// into the one with the largest adjacency sum and the sums add. Otherwise
/// only the occurrence with the best normalized adjacency survives each
/// overlap cluster.
pub fn consolidate(
    occurrences: &[Occurrence],
    same_pattern: bool,
    iou_threshold: f64,
) -> Vec<Occurrence> {
    let clusters = cluster_by_overlap(occurrences, same_pattern, iou_threshold);
    let mut out = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        if cluster.len() == 1 {
            out.push(occurrences[cluster[0]].clone());
            continue;
        }
        if same_pattern {
            let winner = cluster
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    occurrences[a]
                        .adjacency_sum
                        .total_cmp(&occurrences[b].adjacency_sum)
                        .then_with(|| center_key(&occurrences[b]).cmp(&center_key(&occurrences[a])))
                })
                .expect("non-empty cluster");
            let total: f64 = cluster.iter().map(|&i| occurrences[i].adjacency_sum).sum();
            let mut merged = occurrences[winner].clone();
            if merged.adjacency_sum > 0.0 {
                merged.normalized_adjacency *= total / merged.adjacency_sum;
            }
            merged.adjacency_sum = total;
            out.push(merged);
        } else {
            let winner = cluster
                .iter()
                .copied()
                .max_by(|&a, &b| {
                    occurrences[a]
                        .normalized_adjacency
                        .total_cmp(&occurrences[b].normalized_adjacency)
                        .then_with(|| center_key(&occurrences[b]).cmp(&center_key(&occurrences[a])))
                })
                .expect("non-empty cluster");
            out.push(occurrences[winner].clone());
        }
    }
    out.sort_by(|a, b| {
        b.normalized_adjacency
            .total_cmp(&a.normalized_adjacency)
            .then_with(|| center_key(a).cmp(&center_key(b)))
    });
    out
}

/// Two-phase detection of one product: phase one over the size cascade,
/// then a second detection with the best detection's area cropped from the
/// scene as an exact-size pattern. Phase two never runs when phase one
/// found nothing.
pub fn run_two_phase(
    scene: &SceneContext,
    base: &PatternEntry,
    cfg: &RunConfig,
) -> (Vec<Occurrence>, ProductDiagnostics) {
    let mut diag = ProductDiagnostics::default();
    let entries = build_size_cascade(base, cfg.pipeline.min_dim, cfg);
    let original_count = base.features.len();

    let mut phase1 = Vec::new();
    for entry in &entries {
        phase1.extend(detect_single_pattern(
            scene,
            entry,
            cfg,
            &base.pattern_id,
            original_count,
            1,
            &mut diag,
        ));
    }
    let phase1 = consolidate(&phase1, true, cfg.pipeline.iou_threshold);
    if phase1.is_empty() || !cfg.pipeline.two_phase {
        return (phase1, diag);
    }

    let best = phase1
        .iter()
        .max_by(|a, b| {
            a.adjacency_sum
                .total_cmp(&b.adjacency_sum)
                .then_with(|| center_key(b).cmp(&center_key(a)))
        })
        .expect("non-empty phase one");
    let crop = match extract_subimage(&scene.image, &best.envelope) {
        Ok(c) => c,
        Err(_) => return (phase1, diag),
    };
    let phase2_id = format!("{}#p2", base.pattern_id);
    let mut features = extract_features(&crop, &cfg.extractor);
    features.source_id = phase2_id.clone();
    let phase2_entry = PatternEntry {
        pattern_id: phase2_id,
        image: crop,
        features,
        parent_id: Some(base.pattern_id.clone()),
        scale_step: 0,
    };
    let phase2 = detect_single_pattern(
        scene,
        &phase2_entry,
        cfg,
        &base.pattern_id,
        original_count,
        2,
        &mut diag,
    );

    let mut all = phase1;
    all.extend(phase2);
    (consolidate(&all, true, cfg.pipeline.iou_threshold), diag)
}

/// Detect every product in the scene and consolidate across products by
/// normalized adjacency.
pub fn run_multi_product(
    scene: &SceneContext,
    patterns: &[PatternEntry],
    cfg: &RunConfig,
) -> Result<DetectionReport, PipelineError> {
    if patterns.is_empty() {
        return Err(PipelineError::NoPatterns);
    }
    let mut all = Vec::new();
    let mut diagnostics = BTreeMap::new();
    for pattern in patterns {
        let (occurrences, diag) = run_two_phase(scene, pattern, cfg);
        all.extend(occurrences);
        diagnostics
            .entry(pattern.pattern_id.clone())
            .or_insert_with(ProductDiagnostics::default)
            .absorb(&diag);
    }
    let occurrences = consolidate(&all, false, cfg.pipeline.iou_threshold);
    Ok(DetectionReport {
        scene_id: scene.scene_id.clone(),
        occurrences,
        diagnostics,
    })
}
