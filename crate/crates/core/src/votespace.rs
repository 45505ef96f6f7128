//! The vote space: votes bucketed by integer scene pixel and the adjacency
//! projection ("vote image") over which candidate object centers are found.
//!
//! The per-pixel adjacency sums are kept consistent with the buckets at all
//! times: every mutation recomputes the touched pixel's sum by folding the
//! remaining votes in bucket order, so the invariant is bit-exact.

use crate::geometry::Envelope;
use crate::imagecore::{gaussian_blur_f32, GrayF32, RasterImage};
use crate::matching::Vote;

#[derive(Debug, thiserror::Error)]
pub enum VoteSpaceError {
    #[error("vote {index} at ({x}, {y}) is outside the {width}x{height} scene")]
    VoteOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
}

/// A windowed local maximum of the vote image; a candidate object center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposition {
    pub x: usize,
    pub y: usize,
    /// Adjacency mass inside the detection window centered here.
    pub window_adjacency_sum: f64,
}

/// Votes bucketed per scene pixel plus the adjacency-sum projection.
#[derive(Debug, Clone)]
pub struct VoteSpace {
    width: usize,
    height: usize,
    buckets: Vec<Vec<Vote>>,
    vote_image: Vec<f64>,
}

impl VoteSpace {
    pub fn new(width: usize, height: usize) -> Self {
        VoteSpace {
            width,
            height,
            buckets: vec![Vec::new(); width * height],
            vote_image: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vote_image(&self) -> &[f64] {
        &self.vote_image
    }

    pub fn bucket(&self, x: usize, y: usize) -> &[Vote] {
        &self.buckets[y * self.width + x]
    }

    /// Sum of adjacency over every bucket.
    pub fn total_adjacency(&self) -> f64 {
        self.vote_image.iter().sum()
    }

    pub fn vote_count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    /// Insert votes, bucketing each at the floor of its scene position.
    pub fn insert_votes(&mut self, votes: &[Vote]) -> Result<(), VoteSpaceError> {
        for (index, v) in votes.iter().enumerate() {
            if !(v.scene_x >= 0.0
                && v.scene_x < self.width as f64
                && v.scene_y >= 0.0
                && v.scene_y < self.height as f64)
            {
                return Err(VoteSpaceError::VoteOutOfBounds {
                    index,
                    x: v.scene_x,
                    y: v.scene_y,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        for v in votes {
            let bx = v.scene_x.floor() as usize;
            let by = v.scene_y.floor() as usize;
            let b = by * self.width + bx;
            self.buckets[b].push(v.clone());
            self.vote_image[b] = fold_adjacency(&self.buckets[b]);
        }
        Ok(())
    }

    /// Remove every vote whose position lies inside the (rotated) envelope.
    /// Returns the number of removed votes.
    pub fn erase_region(&mut self, envelope: &Envelope) -> usize {
        let (min_x, min_y, max_x, max_y) = envelope.aabb();
        let x0 = min_x.floor().max(0.0) as usize;
        let y0 = min_y.floor().max(0.0) as usize;
        let x1 = (max_x.ceil().max(0.0) as usize).min(self.width);
        let y1 = (max_y.ceil().max(0.0) as usize).min(self.height);
        let mut removed = 0usize;
        for y in y0..y1 {
            for x in x0..x1 {
                let b = y * self.width + x;
                let before = self.buckets[b].len();
                if before == 0 {
                    continue;
                }
                self.buckets[b].retain(|v| !envelope.contains(v.scene_x, v.scene_y));
                let after = self.buckets[b].len();
                if after != before {
                    removed += before - after;
                    self.vote_image[b] = fold_adjacency(&self.buckets[b]);
                }
            }
        }
        removed
    }

    /// Votes whose buckets fall in the `w_size` x `w_size` window centered
    /// at the pixel, clipped at the borders.
    pub fn votes_in_window(&self, cx: usize, cy: usize, w_size: usize) -> Vec<Vote> {
        let r = (w_size / 2) as isize;
        let mut out = Vec::new();
        let y0 = (cy as isize - r).max(0) as usize;
        let y1 = ((cy as isize + r) as usize).min(self.height - 1);
        let x0 = (cx as isize - r).max(0) as usize;
        let x1 = ((cx as isize + r) as usize).min(self.width - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                out.extend_from_slice(&self.buckets[y * self.width + x]);
            }
        }
        out
    }

    /// Whether any vote lies in the window centered at the pixel.
    pub fn window_has_votes(&self, cx: usize, cy: usize, w_size: usize) -> bool {
        let r = (w_size / 2) as isize;
        let y0 = (cy as isize - r).max(0) as usize;
        let y1 = ((cy as isize + r) as usize).min(self.height - 1);
        let x0 = (cx as isize - r).max(0) as usize;
        let x1 = ((cx as isize + r) as usize).min(self.width - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                if !self.buckets[y * self.width + x].is_empty() {
                    return true;
                }
            }
        }
        false
    }

    /// Border-clipped windowed sums of the vote image.
    ///
    /// Built by scattering each nonzero pixel into the windows that cover
    /// it, in row-major pixel order; windows covering the same vote set
    /// therefore accumulate in the same order and compare bit-equal.
    fn windowed_sums(&self, w_size: usize) -> Vec<f64> {
        let r = (w_size / 2) as isize;
        let mut sums = vec![0.0f64; self.width * self.height];
        for y in 0..self.height {
            for x in 0..self.width {
                let v = self.vote_image[y * self.width + x];
                if v == 0.0 {
                    continue;
                }
                let ty0 = (y as isize - r).max(0) as usize;
                let ty1 = ((y as isize + r) as usize).min(self.height - 1);
                let tx0 = (x as isize - r).max(0) as usize;
                let tx1 = ((x as isize + r) as usize).min(self.width - 1);
                for ty in ty0..=ty1 {
                    let row = ty * self.width;
                    for tx in tx0..=tx1 {
                        sums[row + tx] += v;
                    }
                }
            }
        }
        sums
    }

    /// Windowed local maxima of the vote image, strongest first.
    ///
    /// A pixel is a proposition iff its windowed sum is a strict maximum
    /// over the `w_size` x `w_size` neighborhood and the sum reaches
    /// `quality` times the best sum anywhere. Equal windowed sums (a tied
    /// plateau, e.g. every window seeing the same votes) are broken by
    /// the larger raw vote-image value so the winner sits on the votes
    /// themselves, then lexicographically by (y, x); each tied plateau
    /// yields exactly one winner.
    pub fn detect_propositions(&self, w_size: usize, quality: f64) -> Vec<Proposition> {
        assert!(w_size >= 3 && w_size % 2 == 1, "window must be odd and >= 3");
        let sums = self.windowed_sums(w_size);
        let max_sum = sums.iter().copied().fold(0.0f64, f64::max);
        if max_sum <= 0.0 {
            return Vec::new();
        }
        let floor = quality * max_sum;
        let r = (w_size / 2) as isize;
        // ascending key: earlier-ordered pixel wins a tie
        let key = |x: usize, y: usize| {
            (
                std::cmp::Reverse(self.vote_image[y * self.width + x].to_bits()),
                y,
                x,
            )
        };
        let mut props = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let s = sums[y * self.width + x];
                if s <= 0.0 || s < floor {
                    continue;
                }
                let y0 = (y as isize - r).max(0) as usize;
                let y1 = ((y as isize + r) as usize).min(self.height - 1);
                let x0 = (x as isize - r).max(0) as usize;
                let x1 = ((x as isize + r) as usize).min(self.width - 1);
                let mut wins = true;
                'scan: for ny in y0..=y1 {
                    for nx in x0..=x1 {
                        if ny == y && nx == x {
                            continue;
                        }
                        let ns = sums[ny * self.width + nx];
                        if ns > s || (ns == s && key(nx, ny) < key(x, y)) {
                            wins = false;
                            break 'scan;
                        }
                    }
                }
                if wins {
                    props.push(Proposition {
                        x,
                        y,
                        window_adjacency_sum: s,
                    });
                }
            }
        }
        props.sort_by(|a, b| {
            b.window_adjacency_sum
                .total_cmp(&a.window_adjacency_sum)
                .then_with(|| (a.y, a.x).cmp(&(b.y, b.x)))
        });
        props
    }

    /// Vote image blurred and min-max normalized for inspection.
    /// `sigma <= 0` skips the blur.
    pub fn render_debug(&self, sigma: f64) -> RasterImage {
        let mut img = GrayF32 {
            width: self.width,
            height: self.height,
            data: self.vote_image.iter().map(|&v| v as f32).collect(),
        };
        if sigma > 0.0 {
            img = gaussian_blur_f32(&img, sigma).expect("positive sigma");
        }
        let max = img.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let min = img.data.iter().copied().fold(f32::INFINITY, f32::min);
        let range = max - min;
        let data: Vec<u8> = if range <= 0.0 {
            vec![0u8; self.width * self.height]
        } else {
            img.data
                .iter()
                .map(|&v| (((v - min) / range) * 255.0).round() as u8)
                .collect()
        };
        RasterImage::new(self.width, self.height, 1, data).expect("render dimensions")
    }
}

/// Accumulate votes into a fresh vote space.
pub fn accumulate(
    votes: &[Vote],
    scene_w: usize,
    scene_h: usize,
) -> Result<VoteSpace, VoteSpaceError> {
    let mut vs = VoteSpace::new(scene_w, scene_h);
    vs.insert_votes(votes)?;
    Ok(vs)
}

fn fold_adjacency(votes: &[Vote]) -> f64 {
    let mut acc = 0.0;
    for v in votes {
        acc += v.adjacency;
    }
    acc
}
