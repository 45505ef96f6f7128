//! Scene-space geometry: the detection envelope and overlap tests.

use serde::{Deserialize, Serialize};

use crate::circstats::wrap_deg_180;

/// Estimated object rectangle in scene coordinates: center, size and
/// in-plane rotation (degrees, counterclockwise in image coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
    pub rotation: f64,
}

impl Envelope {
    pub fn new(center_x: f64, center_y: f64, width: f64, height: f64, rotation: f64) -> Self {
        debug_assert!(width > 0.0 && height > 0.0);
        Envelope {
            center_x,
            center_y,
            width,
            height,
            rotation: wrap_deg_180(rotation),
        }
    }

    /// Corners of the rotated rectangle, in scene coordinates.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.rotation.to_radians().sin_cos();
        let (hw, hh) = (self.width / 2.0, self.height / 2.0);
        let rot = |dx: f64, dy: f64| {
            (
                self.center_x + dx * c - dy * s,
                self.center_y + dx * s + dy * c,
            )
        };
        [rot(-hw, -hh), rot(hw, -hh), rot(hw, hh), rot(-hw, hh)]
    }

    /// Axis-aligned bounding box `(min_x, min_y, max_x, max_y)` of the
    /// rotated rectangle.
    pub fn aabb(&self) -> (f64, f64, f64, f64) {
        let cs = self.corners();
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for (x, y) in cs {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
        (min_x, min_y, max_x, max_y)
    }

    /// Whether the point lies inside the rotated rectangle (boundary
    /// inclusive).
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.to_radians().sin_cos();
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        // rotate the point back into the envelope frame
        let lx = dx * c + dy * s;
        let ly = -dx * s + dy * c;
        lx.abs() <= self.width / 2.0 && ly.abs() <= self.height / 2.0
    }

    /// Envelope scaled about its center by `factor` (rotation preserved).
    pub fn scaled(&self, factor: f64) -> Envelope {
        Envelope {
            width: self.width * factor,
            height: self.height * factor,
            ..*self
        }
    }
}

/// Intersection-over-union of the axis-aligned bounding boxes of two
/// envelopes. This is the overlap test used for consolidation.
pub fn iou_aabb(a: &Envelope, b: &Envelope) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.aabb();
    let (bx0, by0, bx1, by1) = b.aabb();
    let ix = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let iy = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = ix * iy;
    let union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
