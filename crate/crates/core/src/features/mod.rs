//! Scale- and rotation-aware feature points with descriptors.
//!
//! Features come either from the built-in difference-of-Gaussians extractor
//! ([`extract_features`]) or from an external tool through the JSON feature
//! file format ([`read_features`] / [`write_features`]). The file format is
//! the cross-tool contract: any extractor producing scale, orientation and a
//! fixed-length descriptor can feed the engine.

mod extractor;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::imagecore::{ColorSample, RasterImage};

pub use extractor::{extract_features, ExtractorConfig};

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("point {index}: descriptor length {got}, expected {expected}")]
    DescriptorLength {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("point {index}: position ({x}, {y}) outside image {width}x{height}")]
    PointOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("point {index}: scale {0} must be positive", .scale)]
    NonPositiveScale { index: usize, scale: f64 },
    #[error("invalid feature file: {0}")]
    Schema(String),
    #[error("sample point ({0}, {1}) is outside the image")]
    SampleOutOfBounds(f64, f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One feature point: subpixel position, characteristic scale (pixels),
/// orientation (degrees, [0, 360)), descriptor and local appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub orientation: f64,
    pub descriptor: Vec<f32>,
    pub color: ColorSample,
    pub luminance: u8,
}

/// An ordered set of feature points extracted from one image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub source_id: String,
    pub image_w: usize,
    pub image_h: usize,
    pub descriptor_len: usize,
    pub points: Vec<FeaturePoint>,
}

impl FeatureSet {
    /// Validates the per-point invariants: bounds, positive scale, uniform
    /// descriptor length.
    pub fn validate(&self) -> Result<(), FeatureError> {
        for (index, p) in self.points.iter().enumerate() {
            if p.descriptor.len() != self.descriptor_len {
                return Err(FeatureError::DescriptorLength {
                    index,
                    expected: self.descriptor_len,
                    got: p.descriptor.len(),
                });
            }
            if !(p.x >= 0.0 && p.x < self.image_w as f64 && p.y >= 0.0 && p.y < self.image_h as f64)
            {
                return Err(FeatureError::PointOutOfBounds {
                    index,
                    x: p.x,
                    y: p.y,
                    width: self.image_w,
                    height: self.image_h,
                });
            }
            if !(p.scale > 0.0) {
                return Err(FeatureError::NonPositiveScale {
                    index,
                    scale: p.scale,
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Mean color and luminance over the 3x3 neighborhood of a point, clipped
/// at the image borders. The mean RGB is rounded before deriving HSL and
/// luminance so the sample stays internally consistent.
pub fn sample_point_appearance(
    img: &RasterImage,
    x: f64,
    y: f64,
) -> Result<(ColorSample, u8), FeatureError> {
    if !(x >= 0.0 && x < img.width() as f64 && y >= 0.0 && y < img.height() as f64) {
        return Err(FeatureError::SampleOutOfBounds(x, y));
    }
    let cx = (x.round() as isize).clamp(0, img.width() as isize - 1);
    let cy = (y.round() as isize).clamp(0, img.height() as isize - 1);
    let (mut sr, mut sg, mut sb) = (0.0f64, 0.0, 0.0);
    let mut n = 0.0f64;
    for dy in -1..=1isize {
        for dx in -1..=1isize {
            let px = cx + dx;
            let py = cy + dy;
            if px < 0 || py < 0 || px >= img.width() as isize || py >= img.height() as isize {
                continue;
            }
            let (r, g, b) = img.rgb_at(px as usize, py as usize);
            sr += r as f64;
            sg += g as f64;
            sb += b as f64;
            n += 1.0;
        }
    }
    let r = (sr / n).round() as u8;
    let g = (sg / n).round() as u8;
    let b = (sb / n).round() as u8;
    let sample = ColorSample::from_rgb(r, g, b);
    let lum = sample.luminance;
    Ok((sample, lum))
}

// -- feature file (JSON) ----------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFeaturePoint {
    x: f64,
    y: f64,
    scale: f64,
    orientation: f64,
    descriptor: Vec<f32>,
    rgb: [u8; 3],
    luminance: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureFile {
    source_id: String,
    width: usize,
    height: usize,
    descriptor_len: usize,
    points: Vec<FileFeaturePoint>,
}

/// Write a feature set as JSON. Floats round-trip losslessly (shortest
/// representation that parses back to the same value).
pub fn write_features(fs: &FeatureSet, path: &Path) -> Result<(), FeatureError> {
    let file = FeatureFile {
        source_id: fs.source_id.clone(),
        width: fs.image_w,
        height: fs.image_h,
        descriptor_len: fs.descriptor_len,
        points: fs
            .points
            .iter()
            .map(|p| FileFeaturePoint {
                x: p.x,
                y: p.y,
                scale: p.scale,
                orientation: p.orientation,
                descriptor: p.descriptor.clone(),
                rgb: [p.color.r, p.color.g, p.color.b],
                luminance: p.luminance,
            })
            .collect(),
    };
    let json = serde_json::to_string(&file).map_err(|e| FeatureError::Schema(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Read a feature file, validating descriptor lengths and point bounds.
pub fn read_features(path: &Path) -> Result<FeatureSet, FeatureError> {
    let text = std::fs::read_to_string(path)?;
    let file: FeatureFile =
        serde_json::from_str(&text).map_err(|e| FeatureError::Schema(e.to_string()))?;
    let fs = FeatureSet {
        source_id: file.source_id,
        image_w: file.width,
        image_h: file.height,
        descriptor_len: file.descriptor_len,
        points: file
            .points
            .into_iter()
            .map(|p| {
                let color = ColorSample::from_rgb(p.rgb[0], p.rgb[1], p.rgb[2]);
                FeaturePoint {
                    x: p.x,
                    y: p.y,
                    scale: p.scale,
                    orientation: p.orientation,
                    descriptor: p.descriptor,
                    color,
                    luminance: p.luminance,
                }
            })
            .collect(),
    };
    fs.validate()?;
    Ok(fs)
}
