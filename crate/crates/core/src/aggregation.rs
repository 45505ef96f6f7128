//! Two-pass vote aggregation around a proposition.
//!
//! Pass one gathers every vote in the detection window at the proposition.
//! Pass two flood-fills outward from the proposition, constrained to a
//! scaled-down estimate of the object's envelope, so votes belonging to the
//! object but outside the first window are collected too. Both passes apply
//! unique filtering (at most one vote per pattern feature) before the group
//! is judged by the filter cascade.

use std::collections::VecDeque;

use crate::circstats::{circular_deviation_variance_deg, circular_mean_deg};
use crate::geometry::Envelope;
use crate::matching::Vote;
use crate::votespace::{Proposition, VoteSpace};

#[derive(Debug, thiserror::Error)]
pub enum AggregationError {
    #[error("cannot estimate an envelope from an empty vote group")]
    EmptyGroup,
}

/// Votes aggregated around one proposition, plus their summary statistics.
#[derive(Debug, Clone)]
pub struct VoteGroup {
    /// Unique-filtered votes, sorted by pattern feature index.
    pub votes: Vec<Vote>,
    pub proposition: Proposition,
    pub adjacency_sum: f64,
    pub mean_scale_quotient: f64,
    /// Circular mean of the rotation deltas, degrees in [-180, 180).
    pub circular_mean_rotation: f64,
    /// Mean resultant length of the rotation deltas, in [0, 1].
    pub rotation_resultant: f64,
    /// Population variance of the scale quotients.
    pub scale_variance: f64,
    /// Population variance of angular deviations from the circular mean.
    pub rotation_variance: f64,
}

impl VoteGroup {
    /// Build a group from unique-filtered votes.
    pub fn from_votes(votes: Vec<Vote>, proposition: Proposition) -> Self {
        let adjacency_sum = votes.iter().map(|v| v.adjacency).sum();
        let n = votes.len() as f64;
        let mean_scale_quotient = if votes.is_empty() {
            0.0
        } else {
            votes.iter().map(|v| v.scale_quotient).sum::<f64>() / n
        };
        let scale_variance = if votes.len() < 2 {
            0.0
        } else {
            votes
                .iter()
                .map(|v| {
                    let d = v.scale_quotient - mean_scale_quotient;
                    d * d
                })
                .sum::<f64>()
                / n
        };
        let rotations: Vec<f64> = votes.iter().map(|v| v.rotation_delta).collect();
        let (circular_mean_rotation, rotation_resultant) =
            circular_mean_deg(&rotations).unwrap_or((0.0, 0.0));
        let rotation_variance = circular_deviation_variance_deg(&rotations);
        VoteGroup {
            votes,
            proposition,
            adjacency_sum,
            mean_scale_quotient,
            circular_mean_rotation,
            rotation_resultant,
            scale_variance,
            rotation_variance,
        }
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }
}

/// Detection window size for a pattern whose larger dimension is `p_size`:
/// `(floor(p_size / 100) + 1) * 2 + 1`. Always odd and at least 3.
pub fn window_size(p_size: usize) -> usize {
    (p_size / 100 + 1) * 2 + 1
}

/// Keep at most one vote per pattern feature: the one with the highest
/// adjacency, ties going to the lower scene index. Output is sorted by
/// pattern index.
pub fn unique_filter(votes: &[Vote]) -> Vec<Vote> {
    let mut best: std::collections::HashMap<usize, &Vote> = std::collections::HashMap::new();
    for v in votes {
        best.entry(v.pattern_idx)
            .and_modify(|cur| {
                if v.adjacency > cur.adjacency
                    || (v.adjacency == cur.adjacency && v.scene_idx < cur.scene_idx)
                {
                    *cur = v;
                }
            })
            .or_insert(v);
    }
    let mut out: Vec<Vote> = best.into_values().cloned().collect();
    out.sort_by_key(|v| v.pattern_idx);
    out
}

/// Pass one: all votes in the `w` x `w` window at the proposition, unique
/// filtered.
pub fn aggregate_pass1(vs: &VoteSpace, prop: &Proposition, w: usize) -> VoteGroup {
    let votes = vs.votes_in_window(prop.x, prop.y, w);
    VoteGroup::from_votes(unique_filter(&votes), *prop)
}

/// Envelope estimate from a vote group: adjacency-weighted centroid of the
/// vote positions, pattern size scaled by the mean quotient, rotation from
/// the circular mean.
pub fn estimate_envelope(
    group: &VoteGroup,
    pattern_w: usize,
    pattern_h: usize,
) -> Result<Envelope, AggregationError> {
    if group.is_empty() {
        return Err(AggregationError::EmptyGroup);
    }
    let mass: f64 = group.adjacency_sum;
    let cx = group.votes.iter().map(|v| v.adjacency * v.scene_x).sum::<f64>() / mass;
    let cy = group.votes.iter().map(|v| v.adjacency * v.scene_y).sum::<f64>() / mass;
    Ok(Envelope::new(
        cx,
        cy,
        (pattern_w as f64 * group.mean_scale_quotient).max(1.0),
        (pattern_h as f64 * group.mean_scale_quotient).max(1.0),
        group.circular_mean_rotation,
    ))
}

/// 8-connected flood fill over pixel positions starting at `seed`. A pixel
/// is visited iff `visitable` holds for it (including the seed). Returns
/// the visited pixels.
pub fn flood_fill_visited(
    seed: (usize, usize),
    width: usize,
    height: usize,
    mut visitable: impl FnMut(usize, usize) -> bool,
) -> Vec<(usize, usize)> {
    if seed.0 >= width || seed.1 >= height || !visitable(seed.0, seed.1) {
        return Vec::new();
    }
    let mut visited = vec![false; width * height];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    visited[seed.1 * width + seed.0] = true;
    queue.push_back(seed);
    while let Some((x, y)) = queue.pop_front() {
        out.push((x, y));
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if visited[ny * width + nx] {
                    continue;
                }
                if visitable(nx, ny) {
                    visited[ny * width + nx] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    out
}

/// Pass two: flood fill from the proposition. A pixel is visited if it lies
/// inside the envelope scaled by `shrink` and its `w` x `w` window contains
/// at least one vote. The group is the union of the votes in the visited
/// pixels' windows, unique filtered.
pub fn aggregate_pass2(
    vs: &VoteSpace,
    prop: &Proposition,
    envelope: &Envelope,
    w: usize,
    shrink: f64,
) -> VoteGroup {
    debug_assert!(w % 2 == 1);
    debug_assert!(shrink > 0.0 && shrink <= 1.0);
    let constraint = envelope.scaled(shrink);
    let visited = flood_fill_visited(
        (prop.x, prop.y),
        vs.width(),
        vs.height(),
        |x, y| constraint.contains(x as f64, y as f64) && vs.window_has_votes(x, y, w),
    );

    // union of windows over the visited pixels, as a covered-bucket mask
    let r = (w / 2) as isize;
    let (vw, vh) = (vs.width(), vs.height());
    let mut covered = vec![false; vw * vh];
    for &(x, y) in &visited {
        let y0 = (y as isize - r).max(0) as usize;
        let y1 = ((y as isize + r) as usize).min(vh - 1);
        let x0 = (x as isize - r).max(0) as usize;
        let x1 = ((x as isize + r) as usize).min(vw - 1);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                covered[cy * vw + cx] = true;
            }
        }
    }
    let mut votes = Vec::new();
    for y in 0..vh {
        for x in 0..vw {
            if covered[y * vw + x] {
                votes.extend_from_slice(vs.bucket(x, y));
            }
        }
    }
    VoteGroup::from_votes(unique_filter(&votes), *prop)
}
