//! Built-in feature extractor: Gaussian scale-space difference-of-Gaussians
//! extrema, subpixel refinement, dominant-gradient orientation assignment
//! and a 4x4x8 gradient-histogram descriptor (128 values, L2-normalized).
//!
//! The extractor exists so the engine works out of the box; the feature
//! file format allows substituting any external extractor producing scale
//! and rotation aware points.

use serde::{Deserialize, Serialize};

use crate::imagecore::{gaussian_blur_f32, GrayF32, RasterImage};

use super::{sample_point_appearance, FeaturePoint, FeatureSet};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    /// Number of octaves (clamped so the coarsest level stays >= 8 px).
    pub octaves: usize,
    /// Scales sampled per octave.
    pub scales_per_octave: usize,
    /// Minimum absolute interpolated DoG response, on the 0-1 pixel scale.
    pub contrast_threshold: f32,
    /// Hessian eigenvalue ratio bound for edge rejection.
    pub edge_threshold: f32,
    /// Upsample the input 2x before building the scale space. Finds more
    /// small-scale points at roughly 4x the cost.
    pub upsample: bool,
    /// Keep only the strongest N points (by DoG response). None keeps all.
    pub max_features: Option<usize>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            octaves: 4,
            scales_per_octave: 3,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            upsample: true,
            max_features: None,
        }
    }
}

/// Blur attributed to the input image.
const SIGMA_IN: f64 = 0.5;
/// Blur of the scale-space base level, in seed-image pixels.
const SIGMA_BASE: f64 = 1.6;
/// Border (pixels) inside which extrema are ignored.
const BORDER: isize = 5;
const ORI_BINS: usize = 36;
const ORI_SIGMA_FACTOR: f32 = 1.5;
const ORI_PEAK_RATIO: f32 = 0.8;
const DESC_GRID: usize = 4;
const DESC_BINS: usize = 8;
const DESC_SIGMA_FACTOR: f32 = 3.0;
const DESC_MAG_CAP: f32 = 0.2;

struct ScaleSpace {
    /// Per octave: scales_per_octave + 3 progressively blurred images.
    octaves: Vec<Vec<GrayF32>>,
    /// Per octave: scales_per_octave + 2 difference images.
    dogs: Vec<Vec<GrayF32>>,
}

#[derive(Clone, Copy)]
struct Candidate {
    octave: usize,
    scale: usize,
    x: f64,
    y: f64,
    sigma_octave: f64,
    response: f32,
}

/// Extract feature points. Deterministic: identical bytes and config yield
/// identical output.
pub fn extract_features(img: &RasterImage, cfg: &ExtractorConfig) -> FeatureSet {
    let gray = GrayF32::from_raster(img);
    let set = FeatureSet {
        source_id: String::new(),
        image_w: img.width(),
        image_h: img.height(),
        descriptor_len: DESC_GRID * DESC_GRID * DESC_BINS,
        points: Vec::new(),
    };
    if img.width() < 16 || img.height() < 16 {
        return set;
    }
    let (seed, delta) = seed_image(&gray, cfg.upsample);
    let space = build_scale_space(seed, cfg);
    let mut candidates = find_candidates(&space, cfg);
    if let Some(limit) = cfg.max_features {
        candidates.sort_by(|a, b| {
            b.response
                .abs()
                .total_cmp(&a.response.abs())
                .then(a.y.total_cmp(&b.y))
                .then(a.x.total_cmp(&b.x))
        });
        candidates.truncate(limit * 2); // orientation may split points later
    }

    let mut points = Vec::new();
    for cand in &candidates {
        let gauss = &space.octaves[cand.octave][cand.scale];
        for orientation in dominant_orientations(gauss, cand) {
            let descriptor = describe(gauss, cand, orientation);
            let octave_factor = (1usize << cand.octave) as f64 * delta;
            let x = cand.x * octave_factor;
            let y = cand.y * octave_factor;
            if x < 0.0 || y < 0.0 || x >= img.width() as f64 || y >= img.height() as f64 {
                continue;
            }
            let scale = cand.sigma_octave * octave_factor;
            let (color, luminance) = sample_point_appearance(img, x, y)
                .expect("keypoint inside image bounds");
            points.push((
                cand.response.abs(),
                FeaturePoint {
                    x,
                    y,
                    scale,
                    orientation,
                    descriptor,
                    color,
                    luminance,
                },
            ));
        }
    }
    if let Some(limit) = cfg.max_features {
        points.sort_by(|a, b| a.0.total_cmp(&b.0).reverse());
        points.truncate(limit);
    }
    let mut points: Vec<FeaturePoint> = points.into_iter().map(|(_, p)| p).collect();
    points.sort_by(|a, b| {
        a.y.total_cmp(&b.y)
            .then(a.x.total_cmp(&b.x))
            .then(a.scale.total_cmp(&b.scale))
            .then(a.orientation.total_cmp(&b.orientation))
    });
    points.dedup_by(|a, b| {
        a.x == b.x && a.y == b.y && a.scale == b.scale && a.orientation == b.orientation
    });
    FeatureSet { points, ..set }
}

/// Seed image and the factor mapping seed coordinates to input coordinates.
fn seed_image(gray: &GrayF32, upsample: bool) -> (GrayF32, f64) {
    if upsample {
        let up = resize_bilinear_f32(gray, gray.width * 2, gray.height * 2);
        let sigma = (SIGMA_BASE * SIGMA_BASE - 4.0 * SIGMA_IN * SIGMA_IN)
            .max(0.01)
            .sqrt();
        (gaussian_blur_f32(&up, sigma).expect("positive sigma"), 0.5)
    } else {
        let sigma = (SIGMA_BASE * SIGMA_BASE - SIGMA_IN * SIGMA_IN).sqrt();
        (gaussian_blur_f32(gray, sigma).expect("positive sigma"), 1.0)
    }
}

fn resize_bilinear_f32(img: &GrayF32, new_w: usize, new_h: usize) -> GrayF32 {
    let mut out = GrayF32::zeros(new_w, new_h);
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    for dy in 0..new_h {
        let fy = ((dy as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = (fy - y0 as f64) as f32;
        for dx in 0..new_w {
            let fx = ((dx as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = (fx - x0 as f64) as f32;
            let top = img.at(x0, y0) * (1.0 - wx) + img.at(x1, y0) * wx;
            let bot = img.at(x0, y1) * (1.0 - wx) + img.at(x1, y1) * wx;
            out.set(dx, dy, top * (1.0 - wy) + bot * wy);
        }
    }
    out
}

fn build_scale_space(seed: GrayF32, cfg: &ExtractorConfig) -> ScaleSpace {
    let s = cfg.scales_per_octave;
    let min_dim = seed.width.min(seed.height);
    let max_octaves = if min_dim >= 16 {
        ((min_dim as f64 / 8.0).log2().floor() as usize) + 1
    } else {
        1
    };
    let n_octaves = cfg.octaves.clamp(1, max_octaves);

    // incremental blur from level i-1 to i within an octave
    let k = 2f64.powf(1.0 / s as f64);
    let sigmas: Vec<f64> = (1..s + 3)
        .map(|i| SIGMA_BASE * k.powi(i as i32 - 1) * (k * k - 1.0).sqrt())
        .collect();

    let mut octaves: Vec<Vec<GrayF32>> = Vec::with_capacity(n_octaves);
    let mut base = seed;
    for _ in 0..n_octaves {
        let mut levels = Vec::with_capacity(s + 3);
        levels.push(base);
        for sigma in &sigmas {
            let next = gaussian_blur_f32(levels.last().unwrap(), *sigma).expect("positive sigma");
            levels.push(next);
        }
        // next octave starts from the level with twice the base blur
        base = downsample_half(&levels[s]);
        octaves.push(levels);
    }

    let dogs = octaves
        .iter()
        .map(|levels| {
            levels
                .windows(2)
                .map(|pair| {
                    let mut d = GrayF32::zeros(pair[0].width, pair[0].height);
                    for (o, (a, b)) in d
                        .data
                        .iter_mut()
                        .zip(pair[1].data.iter().zip(pair[0].data.iter()))
                    {
                        *o = a - b;
                    }
                    d
                })
                .collect()
        })
        .collect();
    ScaleSpace { octaves, dogs }
}

fn downsample_half(img: &GrayF32) -> GrayF32 {
    let w = (img.width / 2).max(1);
    let h = (img.height / 2).max(1);
    let mut out = GrayF32::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, img.at(x * 2, y * 2));
        }
    }
    out
}

fn find_candidates(space: &ScaleSpace, cfg: &ExtractorConfig) -> Vec<Candidate> {
    let s = cfg.scales_per_octave;
    let prefilter = 0.5 * cfg.contrast_threshold / s as f32;
    let mut out = Vec::new();
    for (octave, dogs) in space.dogs.iter().enumerate() {
        let (w, h) = (dogs[0].width as isize, dogs[0].height as isize);
        if w < 2 * BORDER + 1 || h < 2 * BORDER + 1 {
            continue;
        }
        for scale in 1..=s {
            for y in BORDER..h - BORDER {
                for x in BORDER..w - BORDER {
                    if !is_extremum(dogs, scale, x as usize, y as usize, prefilter) {
                        continue;
                    }
                    if let Some(cand) = refine(dogs, octave, scale, x, y, cfg) {
                        out.push(cand);
                    }
                }
            }
        }
    }
    out
}

fn is_extremum(dogs: &[GrayF32], scale: usize, x: usize, y: usize, prefilter: f32) -> bool {
    let v = dogs[scale].at(x, y);
    if v.abs() <= prefilter {
        return false;
    }
    let higher = v > 0.0;
    for (level, img) in dogs[scale - 1..=scale + 1].iter().enumerate() {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if level == 1 && dx == 0 && dy == 0 {
                    continue;
                }
                let nv = img.at((x as isize + dx) as usize, (y as isize + dy) as usize);
                if higher && nv > v {
                    return false;
                }
                if !higher && nv < v {
                    return false;
                }
            }
        }
    }
    true
}

/// Quadratic subpixel refinement with contrast and edge rejection.
fn refine(
    dogs: &[GrayF32],
    octave: usize,
    scale: usize,
    x: isize,
    y: isize,
    cfg: &ExtractorConfig,
) -> Option<Candidate> {
    let s_max = dogs.len() - 2;
    let (mut sc, mut px, mut py) = (scale, x, y);
    for _ in 0..5 {
        let prev = &dogs[sc - 1];
        let curr = &dogs[sc];
        let next = &dogs[sc + 1];
        let at = |img: &GrayF32, dx: isize, dy: isize| {
            img.at((px + dx) as usize, (py + dy) as usize) as f64
        };

        let g_s = (at(next, 0, 0) - at(prev, 0, 0)) / 2.0;
        let g_y = (at(curr, 0, 1) - at(curr, 0, -1)) / 2.0;
        let g_x = (at(curr, 1, 0) - at(curr, -1, 0)) / 2.0;

        let v2 = at(curr, 0, 0) * 2.0;
        let h_ss = at(next, 0, 0) + at(prev, 0, 0) - v2;
        let h_yy = at(curr, 0, 1) + at(curr, 0, -1) - v2;
        let h_xx = at(curr, 1, 0) + at(curr, -1, 0) - v2;
        let h_sy = (at(next, 0, 1) - at(next, 0, -1) - at(prev, 0, 1) + at(prev, 0, -1)) / 4.0;
        let h_sx = (at(next, 1, 0) - at(next, -1, 0) - at(prev, 1, 0) + at(prev, -1, 0)) / 4.0;
        let h_xy = (at(curr, 1, 1) - at(curr, -1, 1) - at(curr, 1, -1) + at(curr, -1, -1)) / 4.0;

        let det = h_ss * (h_yy * h_xx - h_xy * h_xy) - h_sy * (h_sy * h_xx - h_xy * h_sx)
            + h_sx * (h_sy * h_xy - h_yy * h_sx);
        if det.abs() < 1e-30 {
            return None;
        }
        // solve H * off = -g (Cramer's rule)
        let off_s = -(g_s * (h_yy * h_xx - h_xy * h_xy) - h_sy * (g_y * h_xx - h_xy * g_x)
            + h_sx * (g_y * h_xy - h_yy * g_x))
            / det;
        let off_y = -(h_ss * (g_y * h_xx - g_x * h_xy) - g_s * (h_sy * h_xx - h_xy * h_sx)
            + h_sx * (h_sy * g_x - g_y * h_sx))
            / det;
        let off_x = -(h_ss * (h_yy * g_x - g_y * h_xy) - h_sy * (h_sy * g_x - g_y * h_sx)
            + g_s * (h_sy * h_xy - h_yy * h_sx))
            / det;

        if off_s.abs() < 0.5 && off_x.abs() < 0.5 && off_y.abs() < 0.5 {
            // interpolated response
            let response = at(curr, 0, 0) + 0.5 * (g_s * off_s + g_y * off_y + g_x * off_x);
            if response.abs() * cfg.scales_per_octave as f64 <= cfg.contrast_threshold as f64 {
                return None;
            }
            if on_edge(curr, px as usize, py as usize, cfg.edge_threshold as f64) {
                return None;
            }
            let sigma_octave = SIGMA_BASE
                * 2f64.powf((sc as f64 + off_s) / cfg.scales_per_octave as f64);
            return Some(Candidate {
                octave,
                scale: sc,
                x: px as f64 + off_x,
                y: py as f64 + off_y,
                sigma_octave,
                response: response as f32,
            });
        }
        px += off_x.round() as isize;
        py += off_y.round() as isize;
        let next_sc = sc as isize + off_s.round() as isize;
        let (w, h) = (dogs[0].width as isize, dogs[0].height as isize);
        if next_sc < 1
            || next_sc > s_max as isize
            || px < BORDER
            || px >= w - BORDER
            || py < BORDER
            || py >= h - BORDER
        {
            return None;
        }
        sc = next_sc as usize;
    }
    None
}

fn on_edge(dog: &GrayF32, x: usize, y: usize, edge_threshold: f64) -> bool {
    let v2 = dog.at(x, y) as f64 * 2.0;
    let dxx = dog.at(x + 1, y) as f64 + dog.at(x - 1, y) as f64 - v2;
    let dyy = dog.at(x, y + 1) as f64 + dog.at(x, y - 1) as f64 - v2;
    let dxy = (dog.at(x + 1, y + 1) as f64 - dog.at(x - 1, y + 1) as f64
        - dog.at(x + 1, y - 1) as f64
        + dog.at(x - 1, y - 1) as f64)
        / 4.0;
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    if det <= 0.0 {
        return true;
    }
    tr * tr * edge_threshold > (edge_threshold + 1.0) * (edge_threshold + 1.0) * det
}

/// Gradient at integer coordinates, y axis pointing up so that angles follow
/// the usual math convention.
#[inline]
fn gradient(img: &GrayF32, x: usize, y: usize) -> (f32, f32) {
    let dx = img.at(x + 1, y) - img.at(x - 1, y);
    let dy = img.at(x, y - 1) - img.at(x, y + 1);
    (dx, dy)
}

/// Orientation histogram peaks (possibly several) in degrees [0, 360).
fn dominant_orientations(gauss: &GrayF32, cand: &Candidate) -> Vec<f64> {
    let sigma = ORI_SIGMA_FACTOR * cand.sigma_octave as f32;
    let radius = (3.0 * sigma).round() as isize;
    let denom = -1.0 / (2.0 * sigma * sigma);
    let (w, h) = (gauss.width as isize, gauss.height as isize);
    let cx = cand.x.round() as isize;
    let cy = cand.y.round() as isize;

    let mut hist = [0.0f32; ORI_BINS];
    for dy in -radius..=radius {
        let y = cy + dy;
        if y <= 0 || y >= h - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let x = cx + dx;
            if x <= 0 || x >= w - 1 {
                continue;
            }
            let (gx, gy) = gradient(gauss, x as usize, y as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            let weight = ((dx * dx + dy * dy) as f32 * denom).exp();
            let angle = (gy as f64).atan2(gx as f64).to_degrees();
            let angle = if angle < 0.0 { angle + 360.0 } else { angle };
            let bin = ((angle / 360.0 * ORI_BINS as f64) as usize).min(ORI_BINS - 1);
            hist[bin] += mag * weight;
        }
    }

    // one pass of [1 4 6 4 1]/16 circular smoothing
    let raw = hist;
    for i in 0..ORI_BINS {
        let m2 = raw[(i + ORI_BINS - 2) % ORI_BINS];
        let m1 = raw[(i + ORI_BINS - 1) % ORI_BINS];
        let p1 = raw[(i + 1) % ORI_BINS];
        let p2 = raw[(i + 2) % ORI_BINS];
        hist[i] = (m2 + p2) / 16.0 + (m1 + p1) * 4.0 / 16.0 + raw[i] * 6.0 / 16.0;
    }

    let max = hist.iter().copied().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let threshold = max * ORI_PEAK_RATIO;
    let mut out = Vec::new();
    for i in 0..ORI_BINS {
        let left = hist[(i + ORI_BINS - 1) % ORI_BINS];
        let right = hist[(i + 1) % ORI_BINS];
        if hist[i] > left && hist[i] > right && hist[i] >= threshold {
            let interp = 0.5 * (left - right) / (left - 2.0 * hist[i] + right);
            let bin = i as f64 + interp as f64;
            let mut angle = bin * 360.0 / ORI_BINS as f64;
            if angle < 0.0 {
                angle += 360.0;
            } else if angle >= 360.0 {
                angle -= 360.0;
            }
            out.push(angle);
        }
    }
    out
}

/// 4x4x8 gradient histogram descriptor, L2-normalized with a 0.2 cap.
fn describe(gauss: &GrayF32, cand: &Candidate, orientation: f64) -> Vec<f32> {
    let n = DESC_GRID;
    let hist_width = DESC_SIGMA_FACTOR * cand.sigma_octave as f32;
    let radius = (hist_width * std::f32::consts::SQRT_2 * (n as f32 + 1.0) * 0.5).round() as isize;
    let (sin_o, cos_o) = (orientation.to_radians().sin() as f32, orientation.to_radians().cos() as f32);
    let (w, h) = (gauss.width as isize, gauss.height as isize);
    let cx = cand.x.round() as isize;
    let cy = cand.y.round() as isize;
    let weight_scale = -2.0 / (n * n) as f32;
    let bin_per_deg = DESC_BINS as f32 / 360.0;

    // (n+2)^2 spatial bins so trilinear spill at the borders lands in
    // discardable cells
    let mut hist = vec![0.0f32; (n + 2) * (n + 2) * DESC_BINS];
    let mut add = |r: usize, c: usize, o: usize, v: f32| {
        hist[(r * (n + 2) + c) * DESC_BINS + o] += v;
    };

    for dy in -radius..=radius {
        let y = cy + dy;
        if y <= 0 || y >= h - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let x = cx + dx;
            if x <= 0 || x >= w - 1 {
                continue;
            }
            // rotate into the keypoint frame, in histogram-cell units.
            // Image y runs down while angles assume y up, hence -dy.
            let fx = dx as f32 / hist_width;
            let fy = -dy as f32 / hist_width;
            let col_rot = fx * cos_o + fy * sin_o;
            let row_rot = -fx * sin_o + fy * cos_o;
            let row_bin = row_rot + (n / 2) as f32 - 0.5;
            let col_bin = col_rot + (n / 2) as f32 - 0.5;
            if row_bin <= -1.0 || row_bin >= n as f32 || col_bin <= -1.0 || col_bin >= n as f32 {
                continue;
            }
            let (gx, gy) = gradient(gauss, x as usize, y as usize);
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let weight = ((col_rot * col_rot + row_rot * row_rot) * weight_scale).exp();
            let mut angle = (gy as f64).atan2(gx as f64).to_degrees() - orientation;
            while angle < 0.0 {
                angle += 360.0;
            }
            while angle >= 360.0 {
                angle -= 360.0;
            }
            let obin = angle as f32 * bin_per_deg;

            let r0 = row_bin.floor();
            let c0 = col_bin.floor();
            let o0 = obin.floor();
            let fr = row_bin - r0;
            let fc = col_bin - c0;
            let fo = obin - o0;
            let val = mag * weight;

            let r_base = (r0 + 1.0) as usize;
            let c_base = (c0 + 1.0) as usize;
            let ob = o0 as usize % DESC_BINS;
            let ob1 = (ob + 1) % DESC_BINS;
            for (ri, rv) in [(r_base, 1.0 - fr), (r_base + 1, fr)] {
                for (ci, cv) in [(c_base, 1.0 - fc), (c_base + 1, fc)] {
                    let vrc = val * rv * cv;
                    add(ri, ci, ob, vrc * (1.0 - fo));
                    add(ri, ci, ob1, vrc * fo);
                }
            }
        }
    }

    // drop the border cells
    let mut desc = Vec::with_capacity(n * n * DESC_BINS);
    for r in 1..=n {
        for c in 1..=n {
            for o in 0..DESC_BINS {
                desc.push(hist[(r * (n + 2) + c) * DESC_BINS + o]);
            }
        }
    }

    let norm = desc.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        let cap = norm * DESC_MAG_CAP;
        for v in &mut desc {
            *v = v.min(cap);
        }
    }
    let norm = desc.iter().map(|v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        for v in &mut desc {
            *v /= norm;
        }
    }
    desc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::resize_bilinear;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Procedural test image: random bright rectangles and discs on a dark
    /// background, feature-rich and reproducible.
    fn painted_image(seed: u64, w: usize, h: usize) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut img = RasterImage::filled(w, h, 3, 24);
        for _ in 0..28 {
            let rw = rng.gen_range(8..w / 4);
            let rh = rng.gen_range(8..h / 4);
            let x0 = rng.gen_range(0..w - rw);
            let y0 = rng.gen_range(0..h - rh);
            let color = [
                rng.gen_range(60..=255u8),
                rng.gen_range(0..=255u8),
                rng.gen_range(0..=255u8),
            ];
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    img.set_pixel(x, y, &color);
                }
            }
        }
        img
    }

    fn rotate90_ccw(img: &RasterImage) -> RasterImage {
        // (x, y) -> (y, w-1-x): column x becomes row (w-1-x)
        let (w, h, ch) = (img.width(), img.height(), img.channels());
        let mut out = RasterImage::filled(h, w, ch, 0);
        for y in 0..h {
            for x in 0..w {
                let px = img.pixel(x, y).to_vec();
                out.set_pixel(y, w - 1 - x, &px);
            }
        }
        out
    }

    #[test]
    fn uniform_image_has_no_features() {
        let img = RasterImage::filled(64, 64, 1, 128);
        let fs = extract_features(&img, &ExtractorConfig::default());
        assert!(fs.is_empty());
    }

    #[test]
    fn extraction_is_deterministic() {
        let img = painted_image(7, 160, 120);
        let cfg = ExtractorConfig::default();
        let a = extract_features(&img, &cfg);
        let b = extract_features(&img, &cfg);
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn descriptors_are_unit_norm_and_in_bounds() {
        let img = painted_image(3, 200, 150);
        let fs = extract_features(&img, &ExtractorConfig::default());
        assert!(fs.len() > 20, "got {}", fs.len());
        fs.validate().unwrap();
        for p in &fs.points {
            let norm: f32 = p.descriptor.iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((norm - 1.0).abs() < 1e-3, "norm {norm}");
            assert!(p.descriptor.iter().all(|&v| v >= 0.0));
            assert!(p.orientation >= 0.0 && p.orientation < 360.0);
        }
    }

    #[test]
    fn rotation_by_90_degrees_is_recovered() {
        let img = painted_image(11, 180, 180);
        let cfg = ExtractorConfig::default();
        let orig = extract_features(&img, &cfg);
        let rotated = extract_features(&rotate90_ccw(&img), &cfg);
        assert!(orig.len() > 30);

        let w = img.width() as f64;
        // inverse of (x,y) -> (y, w-1-x)
        let unrotate = |x: f64, y: f64| (w - 1.0 - y, x);
        let mut refound = 0usize;
        let mut tested = 0usize;
        for p in &orig.points {
            if p.x < 10.0 || p.y < 10.0 || p.x > w - 10.0 || p.y > img.height() as f64 - 10.0 {
                continue;
            }
            tested += 1;
            let hit = rotated.points.iter().any(|q| {
                let (qx, qy) = unrotate(q.x, q.y);
                let d2 = (qx - p.x).powi(2) + (qy - p.y).powi(2);
                if d2 > 4.0 {
                    return false;
                }
                let delta = crate::circstats::wrap_deg_180(q.orientation - p.orientation);
                (delta - 90.0).abs() <= 15.0 || (delta + 90.0).abs() <= 15.0
            });
            if hit {
                refound += 1;
            }
        }
        assert!(tested > 20);
        let rate = refound as f64 / tested as f64;
        assert!(rate >= 0.7, "re-found rate {rate:.3} ({refound}/{tested})");
    }

    #[test]
    fn downscale_by_two_halves_matched_scales() {
        let img = painted_image(5, 220, 180);
        let cfg = ExtractorConfig::default();
        let orig = extract_features(&img, &cfg);
        let small_img = resize_bilinear(&img, 110, 90).unwrap();
        let small = extract_features(&small_img, &cfg);
        assert!(orig.len() > 30 && small.len() > 10);

        // exhaustive mutual nearest neighbor matching
        let dist = |a: &[f32], b: &[f32]| -> f32 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
        };
        let nn = |from: &FeatureSet, to: &FeatureSet, i: usize| -> usize {
            let mut best = 0;
            let mut best_d = f32::INFINITY;
            for (j, q) in to.points.iter().enumerate() {
                let d = dist(&from.points[i].descriptor, &q.descriptor);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            best
        };
        let mut quotients = Vec::new();
        for i in 0..small.len() {
            let j = nn(&small, &orig, i);
            if nn(&orig, &small, j) == i {
                quotients.push(small.points[i].scale / orig.points[j].scale);
            }
        }
        assert!(quotients.len() >= 10, "only {} mutual matches", quotients.len());
        quotients.sort_by(f64::total_cmp);
        let median = quotients[quotients.len() / 2];
        assert!(
            (0.4..=0.6).contains(&median),
            "median scale quotient {median:.3}"
        );
    }
}
