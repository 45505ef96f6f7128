//! Circular statistics over angles in degrees.
//!
//! Rotation differences live on a circle, so their mean and variance cannot
//! be computed with ordinary arithmetic. The mean direction comes from the
//! summed unit vectors; spread statistics are taken over angular deviations
//! from that mean, wrapped into [-180, 180).

/// Wrap an angle in degrees into `[-180, 180)`.
pub fn wrap_deg_180(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a < -180.0 {
        a += 360.0;
    } else if a >= 180.0 {
        a -= 360.0;
    }
    // -0.0 compares equal to 0.0 but serializes differently
    if a == 0.0 {
        a = 0.0;
    }
    a
}

/// Wrap an angle in degrees into `[0, 360)`.
pub fn wrap_deg_360(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a < 0.0 {
        a += 360.0;
    }
    if a == 360.0 {
        a = 0.0;
    }
    a
}

/// Mean direction and mean resultant length of a set of angles (degrees).
///
/// Returns `(mean_deg in [-180, 180), resultant in [0, 1])`, or `None` for an
/// empty slice. A resultant near zero means the angles are spread uniformly
/// and no meaningful mean direction exists.
pub fn circular_mean_deg(angles: &[f64]) -> Option<(f64, f64)> {
    if angles.is_empty() {
        return None;
    }
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for &a in angles {
        let r = a.to_radians();
        sx += r.cos();
        sy += r.sin();
    }
    let n = angles.len() as f64;
    let resultant = (sx * sx + sy * sy).sqrt() / n;
    let mean = if resultant < f64::EPSILON {
        0.0
    } else {
        wrap_deg_180(sy.atan2(sx).to_degrees())
    };
    Some((mean, resultant))
}

/// Angular deviations of each angle from the circular mean, wrapped into
/// `[-180, 180)`. Empty input yields an empty vector.
pub fn angular_deviations_deg(angles: &[f64]) -> Vec<f64> {
    match circular_mean_deg(angles) {
        Some((mean, _)) => angles.iter().map(|&a| wrap_deg_180(a - mean)).collect(),
        None => Vec::new(),
    }
}

/// Population variance of the angular deviations from the circular mean.
///
/// This is the rotation-spread statistic carried by vote groups. Returns 0
/// for sets with fewer than two angles.
pub fn circular_deviation_variance_deg(angles: &[f64]) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    let devs = angular_deviations_deg(angles);
    let mean = devs.iter().sum::<f64>() / devs.len() as f64;
    devs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / devs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_180_basics() {
        assert_eq!(wrap_deg_180(0.0), 0.0);
        assert_eq!(wrap_deg_180(180.0), -180.0);
        assert_eq!(wrap_deg_180(-180.0), -180.0);
        assert_eq!(wrap_deg_180(350.0), -10.0);
        assert_eq!(wrap_deg_180(540.0), -180.0);
        assert_eq!(wrap_deg_180(-350.0), 10.0);
    }

    #[test]
    fn wrap_360_basics() {
        assert_eq!(wrap_deg_360(-10.0), 350.0);
        assert_eq!(wrap_deg_360(360.0), 0.0);
        assert_eq!(wrap_deg_360(725.0), 5.0);
    }

    #[test]
    fn mean_of_symmetric_pair_is_zero() {
        let (mean, r) = circular_mean_deg(&[10.0, 350.0]).unwrap();
        assert!(mean.abs() < 1e-9);
        assert!(r > 0.9);
    }

    #[test]
    fn mean_of_opposed_pair_has_zero_resultant() {
        let (_, r) = circular_mean_deg(&[90.0, -90.0]).unwrap();
        assert!(r < 1e-9);
    }

    #[test]
    fn deviations_wrap_across_zero() {
        let devs = angular_deviations_deg(&[10.0, 350.0]);
        let mut sorted = devs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] + 10.0).abs() < 1e-9);
        assert!((sorted[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn empty_input_is_none() {
        assert!(circular_mean_deg(&[]).is_none());
        assert!(angular_deviations_deg(&[]).is_empty());
    }
}
