//! Approximate nearest-neighbor index over pattern descriptors: a forest of
//! randomized kd-trees searched best-bin-first with a bounded check budget.
//! An exact mode scans all descriptors and is used wherever determinism
//! matters more than speed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LEAF_SIZE: usize = 8;
/// Split dimension is drawn from this many top-variance dimensions.
const TOP_VARIANCE_DIMS: usize = 5;

#[derive(Debug)]
enum Node {
    Leaf {
        points: Vec<usize>,
    },
    Split {
        dim: usize,
        value: f32,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// Immutable descriptor index. Queries return the (approximate) nearest
/// pattern descriptor under L2.
#[derive(Debug)]
pub struct DescriptorIndex {
    descriptors: Vec<Vec<f32>>,
    trees: Vec<Node>,
    checks: usize,
    exact: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot build a descriptor index over an empty feature set")]
pub struct EmptyIndexError;

struct Branch<'a> {
    bound: f32,
    node: &'a Node,
}

impl PartialEq for Branch<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound
    }
}
impl Eq for Branch<'_> {}
impl PartialOrd for Branch<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Branch<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on the lower bound
        other.bound.total_cmp(&self.bound)
    }
}

#[inline]
fn l2_distance_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

impl DescriptorIndex {
    /// Build a forest of `trees` randomized kd-trees. `checks` bounds the
    /// number of leaf points examined per query; `exact` switches queries
    /// to a full scan.
    pub fn build(
        descriptors: Vec<Vec<f32>>,
        trees: usize,
        checks: usize,
        exact: bool,
        seed: u64,
    ) -> Result<Self, EmptyIndexError> {
        if descriptors.is_empty() {
            return Err(EmptyIndexError);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let all: Vec<usize> = (0..descriptors.len()).collect();
        let forest = (0..trees.max(1))
            .map(|_| build_node(&descriptors, all.clone(), &mut rng))
            .collect();
        Ok(DescriptorIndex {
            descriptors,
            trees: forest,
            checks: checks.max(1),
            exact,
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    /// Nearest neighbor of `query`: `(pattern index, L2 distance)`.
    pub fn nearest(&self, query: &[f32]) -> (usize, f64) {
        if self.exact {
            return self.nearest_exact(query);
        }
        let mut best = usize::MAX;
        let mut best_d = f32::INFINITY;
        let mut checked = 0usize;
        let mut heap: BinaryHeap<Branch> = BinaryHeap::new();
        for tree in &self.trees {
            heap.push(Branch {
                bound: 0.0,
                node: tree,
            });
        }
        let mut visited = vec![false; self.descriptors.len()];
        while let Some(Branch { bound, node }) = heap.pop() {
            if checked >= self.checks * 4 || (checked >= self.checks && bound * bound > best_d) {
                break;
            }
            let mut current = node;
            let mut residual = bound;
            loop {
                match current {
                    Node::Leaf { points } => {
                        for &p in points {
                            if visited[p] {
                                continue;
                            }
                            visited[p] = true;
                            checked += 1;
                            let d = l2_distance_sq(query, &self.descriptors[p]);
                            if d < best_d || (d == best_d && p < best) {
                                best_d = d;
                                best = p;
                            }
                        }
                        break;
                    }
                    Node::Split {
                        dim,
                        value,
                        left,
                        right,
                    } => {
                        let diff = query[*dim] - value;
                        let (near, far) = if diff <= 0.0 {
                            (left, right)
                        } else {
                            (right, left)
                        };
                        let far_bound = residual.max(diff.abs());
                        heap.push(Branch {
                            bound: far_bound,
                            node: far,
                        });
                        residual = residual.max(0.0);
                        current = near;
                    }
                }
            }
            if checked >= self.checks {
                // drain only branches that could still improve
                if let Some(top) = heap.peek() {
                    if top.bound * top.bound > best_d {
                        break;
                    }
                } else {
                    break;
                }
            }
        }
        if best == usize::MAX {
            return self.nearest_exact(query);
        }
        (best, (best_d as f64).sqrt())
    }

    fn nearest_exact(&self, query: &[f32]) -> (usize, f64) {
        let mut best = 0usize;
        let mut best_d = f32::INFINITY;
        for (i, d) in self.descriptors.iter().enumerate() {
            let dist = l2_distance_sq(query, d);
            if dist < best_d {
                best_d = dist;
                best = i;
            }
        }
        (best, (best_d as f64).sqrt())
    }
}

fn build_node(descriptors: &[Vec<f32>], points: Vec<usize>, rng: &mut ChaCha8Rng) -> Node {
    if points.len() <= LEAF_SIZE {
        return Node::Leaf { points };
    }
    let dim_count = descriptors[0].len();
    // variance per dimension over this node's points
    let mut mean = vec![0.0f64; dim_count];
    for &p in &points {
        for (m, &v) in mean.iter_mut().zip(&descriptors[p]) {
            *m += v as f64;
        }
    }
    let n = points.len() as f64;
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0f64; dim_count];
    for &p in &points {
        for ((vv, &v), m) in var.iter_mut().zip(&descriptors[p]).zip(&mean) {
            let d = v as f64 - m;
            *vv += d * d;
        }
    }
    let mut order: Vec<usize> = (0..dim_count).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]));
    let top = order.len().min(TOP_VARIANCE_DIMS);
    let dim = order[rng.gen_range(0..top)];
    let value = mean[dim] as f32;

    let (left, right): (Vec<usize>, Vec<usize>) = points
        .iter()
        .partition(|&&p| descriptors[p][dim] <= value);
    if left.is_empty() || right.is_empty() {
        // degenerate split (constant dimension); fall back to a leaf
        return Node::Leaf { points };
    }
    Node::Split {
        dim,
        value,
        left: Box::new(build_node(descriptors, left, rng)),
        right: Box::new(build_node(descriptors, right, rng)),
    }
}
