//! Raster primitives: 8-bit images, color conversion, resizing, blurring,
//! subimage extraction and normalized cross-correlation.
//!
//! Pixel data is row-major, `channels` interleaved, 8 bits per channel.
//! Heavier numeric work (blurring, the feature extractor's scale space)
//! runs on [`GrayF32`] buffers and converts at the edges.

use std::path::Path;

use crate::geometry::Envelope;

/// Error type for raster operations.
#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("invalid image dimensions {width}x{height} with {channels} channels")]
    InvalidDimensions {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error("pixel data length {got} does not match {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("target size {width}x{height} must be at least 1x1")]
    ZeroTarget { width: usize, height: usize },
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("normalized cross-correlation requires single-channel images")]
    NccChannels,
    #[error("envelope does not intersect the image")]
    EmptyCrop,
    #[error("point ({0}, {1}) is outside the image")]
    OutOfBounds(f64, f64),
    #[error("failed to decode image: {0}")]
    Decode(String),
    #[error("failed to encode image: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 8-bit raster image, 1 (luminance) or 3 (RGB) channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || !(channels == 1 || channels == 3) {
            return Err(ImageError::InvalidDimensions {
                width,
                height,
                channels,
            });
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(ImageError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image filled with a constant value on every channel.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        RasterImage::new(width, height, channels, vec![value; width * height * channels])
            .expect("constant image dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, px: &[u8]) {
        let i = (y * self.width + x) * self.channels;
        self.data[i..i + self.channels].copy_from_slice(px);
    }

    /// RGB value at a pixel; single-channel images replicate luminance.
    #[inline]
    pub fn rgb_at(&self, x: usize, y: usize) -> (u8, u8, u8) {
        let p = self.pixel(x, y);
        if self.channels == 1 {
            (p[0], p[0], p[0])
        } else {
            (p[0], p[1], p[2])
        }
    }
}

/// Single-channel float image used internally for convolution-heavy work.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayF32 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayF32 {
    pub fn zeros(width: usize, height: usize) -> Self {
        GrayF32 {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Luminance of an 8-bit image scaled into [0, 1].
    pub fn from_raster(img: &RasterImage) -> Self {
        let gray = to_grayscale(img);
        GrayF32 {
            width: gray.width,
            height: gray.height,
            data: gray.data.iter().map(|&v| v as f32 / 255.0).collect(),
        }
    }
}

const REC601_R: f64 = 0.299;
const REC601_G: f64 = 0.587;
const REC601_B: f64 = 0.114;

/// Rec.601 luminance of an RGB triple, rounded to the nearest integer.
#[inline]
pub fn luminance_u8(r: u8, g: u8, b: u8) -> u8 {
    (REC601_R * r as f64 + REC601_G * g as f64 + REC601_B * b as f64).round() as u8
}

/// Convert to a single-channel Rec.601 luminance image. Single-channel
/// input is returned as a copy.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.channels == 1 {
        return img.clone();
    }
    let mut data = Vec::with_capacity(img.width * img.height);
    for px in img.data.chunks_exact(3) {
        data.push(luminance_u8(px[0], px[1], px[2]));
    }
    RasterImage::new(img.width, img.height, 1, data).expect("grayscale dimensions")
}

/// Color at a feature point: RGB plus the derived HSL channels and
/// luminance. Lightness uses the 0-255 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorSample {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    /// Hue in degrees [0, 360); 0 for achromatic input.
    pub h: f64,
    /// Saturation in [0, 1].
    pub s: f64,
    /// Lightness on the 0-255 scale.
    pub l: f64,
    /// Rec.601 luminance, rounded.
    pub luminance: u8,
}

impl ColorSample {
    pub fn from_rgb(r: u8, g: u8, b: u8) -> Self {
        let (h, s, l) = rgb_to_hsl(r, g, b);
        ColorSample {
            r,
            g,
            b,
            h,
            s,
            l,
            luminance: luminance_u8(r, g, b),
        }
    }
}

/// RGB (0-255 per channel) to HSL with hue in degrees [0, 360), saturation
/// in [0, 1] and lightness scaled to 0-255. Achromatic input yields hue 0.
pub fn rgb_to_hsl(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let rf = r as f64 / 255.0;
    let gf = g as f64 / 255.0;
    let bf = b as f64 / 255.0;
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let l01 = (max + min) / 2.0;
    if max == min {
        return (0.0, 0.0, l01 * 255.0);
    }
    let delta = max - min;
    let s = delta / (1.0 - (2.0 * l01 - 1.0).abs());
    let h = if max == rf {
        60.0 * (((gf - bf) / delta).rem_euclid(6.0))
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    let h = if h >= 360.0 { h - 360.0 } else { h };
    (h, s, l01 * 255.0)
}

/// Inverse of [`rgb_to_hsl`]: hue in degrees, saturation in [0, 1],
/// lightness on the 0-255 scale.
pub fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let l01 = l / 255.0;
    let c = (1.0 - (2.0 * l01 - 1.0).abs()) * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l01 - c / 2.0;
    let to8 = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (to8(r1), to8(g1), to8(b1))
}

/// Bilinear resize to the target dimensions. Aspect ratio is not preserved;
/// callers that need it compute the target size accordingly.
pub fn resize_bilinear(
    img: &RasterImage,
    new_w: usize,
    new_h: usize,
) -> Result<RasterImage, ImageError> {
    if new_w == 0 || new_h == 0 {
        return Err(ImageError::ZeroTarget {
            width: new_w,
            height: new_h,
        });
    }
    if new_w == img.width && new_h == img.height {
        return Ok(img.clone());
    }
    let ch = img.channels;
    let mut data = vec![0u8; new_w * new_h * ch];
    // pixel-center mapping: dst center (i+0.5) maps to src (i+0.5)*scale
    let sx = img.width as f64 / new_w as f64;
    let sy = img.height as f64 / new_h as f64;
    for dy in 0..new_h {
        let fy = ((dy as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let wy = fy - y0 as f64;
        for dx in 0..new_w {
            let fx = ((dx as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let wx = fx - x0 as f64;
            let p00 = img.pixel(x0, y0);
            let p10 = img.pixel(x1, y0);
            let p01 = img.pixel(x0, y1);
            let p11 = img.pixel(x1, y1);
            let out = (dy * new_w + dx) * ch;
            for c in 0..ch {
                let top = p00[c] as f64 * (1.0 - wx) + p10[c] as f64 * wx;
                let bot = p01[c] as f64 * (1.0 - wx) + p11[c] as f64 * wx;
                data[out + c] = (top * (1.0 - wy) + bot * wy).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    RasterImage::new(new_w, new_h, ch, data)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        k.push((-d * d / denom).exp());
    }
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur of a float image, kernel radius `ceil(3 sigma)`,
/// edges clamped.
pub fn gaussian_blur_f32(img: &GrayF32, sigma: f64) -> Result<GrayF32, ImageError> {
    if sigma <= 0.0 {
        return Err(ImageError::NonPositiveSigma(sigma));
    }
    let kernel: Vec<f32> = gaussian_kernel(sigma).iter().map(|&v| v as f32).collect();
    let radius = kernel.len() / 2;
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0f32; w * h];
    // horizontal pass: clamped borders, straight interior
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        let out_row = &mut tmp[y * w..(y + 1) * w];
        let interior_end = w.saturating_sub(radius);
        for x in 0..w.min(radius) {
            let mut acc = 0.0f32;
            for (i, &kv) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                acc += row[sx as usize] * kv;
            }
            out_row[x] = acc;
        }
        for x in radius..interior_end {
            let window = &row[x - radius..x + radius + 1];
            let mut acc = 0.0f32;
            for (v, kv) in window.iter().zip(&kernel) {
                acc += v * kv;
            }
            out_row[x] = acc;
        }
        for x in interior_end.max(radius.min(w))..w {
            let mut acc = 0.0f32;
            for (i, &kv) in kernel.iter().enumerate() {
                let sx = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                acc += row[sx as usize] * kv;
            }
            out_row[x] = acc;
        }
    }
    // vertical pass: accumulate whole rows so the inner loop runs along x
    let mut out = GrayF32::zeros(w, h);
    for y in 0..h {
        let out_row = &mut out.data[y * w..(y + 1) * w];
        for (i, &kv) in kernel.iter().enumerate() {
            let sy = (y as isize + i as isize - radius as isize).clamp(0, h as isize - 1) as usize;
            let src = &tmp[sy * w..(sy + 1) * w];
            for (o, s) in out_row.iter_mut().zip(src) {
                *o += s * kv;
            }
        }
    }
    Ok(out)
}

/// Separable Gaussian blur of an 8-bit image (per channel), kernel radius
/// `ceil(3 sigma)`, edges clamped.
pub fn gaussian_blur(img: &RasterImage, sigma: f64) -> Result<RasterImage, ImageError> {
    if sigma <= 0.0 {
        return Err(ImageError::NonPositiveSigma(sigma));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (w, h, ch) = (img.width, img.height, img.channels);
    let mut tmp = vec![0.0f64; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (i, &kv) in kernel.iter().enumerate() {
                    let sx = (x as isize + i as isize - radius as isize).clamp(0, w as isize - 1);
                    acc += img.data[(y * w + sx as usize) * ch + c] as f64 * kv;
                }
                tmp[(y * w + x) * ch + c] = acc;
            }
        }
    }
    let mut data = vec![0u8; w * h * ch];
    for x in 0..w {
        for y in 0..h {
            for c in 0..ch {
                let mut acc = 0.0;
                for (i, &kv) in kernel.iter().enumerate() {
                    let sy = (y as isize + i as isize - radius as isize).clamp(0, h as isize - 1);
                    acc += tmp[(sy as usize * w + x) * ch + c] * kv;
                }
                data[(y * w + x) * ch + c] = acc.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    RasterImage::new(w, h, ch, data)
}

/// Normalized cross-correlation of two equally sized single-channel images,
/// mapped from Pearson correlation into [0, 1] via `(rho + 1) / 2`.
///
/// A constant image has no defined correlation; the zero-correlation value
/// 0.5 is returned instead.
pub fn ncc(a: &RasterImage, b: &RasterImage) -> Result<f64, ImageError> {
    if a.channels != 1 || b.channels != 1 {
        return Err(ImageError::NccChannels);
    }
    if a.width != b.width || a.height != b.height {
        return Err(ImageError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    let n = (a.width * a.height) as f64;
    let mean_a = a.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mean_b = b.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut cov, mut var_a, mut var_b) = (0.0, 0.0, 0.0);
    for (&va, &vb) in a.data.iter().zip(&b.data) {
        let da = va as f64 - mean_a;
        let db = vb as f64 - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Ok(0.5);
    }
    let rho = (cov / (var_a.sqrt() * var_b.sqrt())).clamp(-1.0, 1.0);
    Ok((rho + 1.0) / 2.0)
}

/// Axis-aligned crop of the envelope's bounding box, clipped to the image.
/// The envelope's rotation widens the box but the crop itself is upright.
pub fn extract_subimage(img: &RasterImage, envelope: &Envelope) -> Result<RasterImage, ImageError> {
    let (min_x, min_y, max_x, max_y) = envelope.aabb();
    let x0 = min_x.floor().max(0.0) as usize;
    let y0 = min_y.floor().max(0.0) as usize;
    let x1 = (max_x.ceil() as isize).min(img.width as isize) as usize;
    let y1 = (max_y.ceil() as isize).min(img.height as isize) as usize;
    if min_x >= img.width as f64 || min_y >= img.height as f64 || x1 <= x0 || y1 <= y0 {
        return Err(ImageError::EmptyCrop);
    }
    let (cw, chh) = (x1 - x0, y1 - y0);
    let ch = img.channels;
    let mut data = Vec::with_capacity(cw * chh * ch);
    for y in y0..y1 {
        let start = (y * img.width + x0) * ch;
        data.extend_from_slice(&img.data[start..start + cw * ch]);
    }
    RasterImage::new(cw, chh, ch, data)
}

/// Decode a PNG or JPEG file into a raster image. Gray images stay
/// single-channel; everything else converts to RGB.
pub fn read_image(path: &Path) -> Result<RasterImage, ImageError> {
    let dyn_img = image::open(path).map_err(|e| ImageError::Decode(e.to_string()))?;
    Ok(match dyn_img {
        image::DynamicImage::ImageLuma8(g) => {
            let (w, h) = (g.width() as usize, g.height() as usize);
            RasterImage::new(w, h, 1, g.into_raw())?
        }
        other => {
            let rgb = other.to_rgb8();
            let (w, h) = (rgb.width() as usize, rgb.height() as usize);
            RasterImage::new(w, h, 3, rgb.into_raw())?
        }
    })
}

/// Encode as PNG (lossless).
pub fn write_png(img: &RasterImage, path: &Path) -> Result<(), ImageError> {
    let color = if img.channels == 1 {
        image::ExtendedColorType::L8
    } else {
        image::ExtendedColorType::Rgb8
    };
    image::save_buffer_with_format(
        path,
        &img.data,
        img.width as u32,
        img.height as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| ImageError::Encode(e.to_string()))
}
