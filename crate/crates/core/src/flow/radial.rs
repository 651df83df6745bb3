//! The radial time-1 map of the disk flow: a self-homeomorphism of [0, 1]
//! fixing 0, the dyadic radii 2^-n, and the midpoints 3·2^-(n+2), built by
//! rescaling a fixed three-piece map into each dyadic band (2^-(n+1), 2^-n].
//! Circles at 2^-n attract (slope 1/2 at the fixed point), circles at
//! 3·2^-(n+2) repel (slope 2).

use crate::error::{Error, Result};

/// Three-piece base map on [-1, 1]: slope 1/2 on the outer thirds, slope 2 on
/// the middle third. Fixes -1, 0, 1.
pub fn base_map(x: f64) -> f64 {
    if x <= -1.0 / 3.0 {
        -1.0 + (x + 1.0) / 2.0
    } else if x < 1.0 / 3.0 {
        2.0 * x
    } else {
        1.0 + (x - 1.0) / 2.0
    }
}

pub fn base_map_inv(y: f64) -> f64 {
    if y <= -2.0 / 3.0 {
        2.0 * (y + 1.0) - 1.0
    } else if y < 2.0 / 3.0 {
        y / 2.0
    } else {
        2.0 * (y - 1.0) + 1.0
    }
}

/// Index n of the dyadic band (2^-(n+1), 2^-n] containing r ∈ (0, 1].
pub fn band_index(r: f64) -> i32 {
    debug_assert!(r > 0.0 && r <= 1.0);
    let mut n = (-r.log2()).floor() as i32;
    // guard against log rounding at band edges
    if r > 2f64.powi(-n) {
        n -= 1;
    } else if r <= 2f64.powi(-(n + 1)) {
        n += 1;
    }
    n
}

/// Time-1 radial map f: [0,1] -> [0,1]. f(0)=0; on (2^-(n+1), 2^-n] the map
/// is the affine conjugate of the base map centered at 3·2^-(n+2).
pub fn time_one_map_radial(r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) || !r.is_finite() {
        return Err(Error::domain(format!("radius {r} outside [0, 1]")));
    }
    Ok(eval(r))
}

pub(crate) fn eval(r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let n = band_index(r);
    let scale = 2f64.powi(-(n + 2));
    let mid = 3.0 * scale;
    scale * base_map((r - mid) / scale) + mid
}

pub(crate) fn eval_inv(y: f64) -> f64 {
    if y == 0.0 {
        return 0.0;
    }
    let n = band_index(y);
    let scale = 2f64.powi(-(n + 2));
    let mid = 3.0 * scale;
    scale * base_map_inv((y - mid) / scale) + mid
}

/// Fixed points adjacent to r (r itself not fixed): the endpoints of the
/// monotonicity interval of the suspension chart through r.
pub(crate) fn bracket(r: f64) -> (f64, f64) {
    let n = band_index(r);
    let lo = 2f64.powi(-(n + 1));
    let hi = 2f64.powi(-n);
    let mid = 3.0 * 2f64.powi(-(n + 2));
    if r < mid {
        (lo, mid)
    } else {
        (mid, hi)
    }
}

/// Snap radii that are fixed points (band endpoints or midpoints) to their
/// exact dyadic value; returns None for interior radii.
pub(crate) fn snap_fixed(r: f64) -> Option<f64> {
    if r == 0.0 {
        return Some(0.0);
    }
    let n = band_index(r);
    let scale = 2f64.powi(-(n + 2));
    for fp in [2f64.powi(-(n + 1)), 3.0 * scale, 2f64.powi(-n)] {
        if (r - fp).abs() <= 1e-13 * scale.max(1e-300) {
            return Some(fp);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_map_fixes_endpoints_and_zero() {
        assert_eq!(base_map(-1.0), -1.0);
        assert_eq!(base_map(0.0), 0.0);
        assert_eq!(base_map(1.0), 1.0);
        // continuity at the junctions
        assert!((base_map(-1.0 / 3.0) - (-2.0 / 3.0)).abs() < 1e-15);
        assert!((base_map(1.0 / 3.0) - (2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn paper_values() {
        assert_eq!(time_one_map_radial(0.0).unwrap(), 0.0);
        // n=1 band: argument of the base map is 1, value 1, so f(1/2) = 1/2
        assert!((time_one_map_radial(0.5).unwrap() - 0.5).abs() < 1e-15);
        // midpoint of the n=1 band: argument 0, so f(3/8) = 3/8
        assert!((time_one_map_radial(0.375).unwrap() - 0.375).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_interior_values() {
        // 0.3 lies in (1/4, 1/2], below the repelling midpoint 3/8:
        // f0(8(0.3-0.375)) = f0(-0.6) = -0.8, so f(0.3) = 0.375 - 0.1 = 0.275
        // (the flow moves it toward the attracting circle r = 1/4).
        assert!((time_one_map_radial(0.3).unwrap() - 0.275).abs() < 1e-12);
        // 0.42 lies above 3/8: f0(0.36) = 0.68, f(0.42) = 0.46 > 0.42.
        let f42 = time_one_map_radial(0.42).unwrap();
        assert!((f42 - 0.46).abs() < 1e-12);
        assert!(f42 > 0.42);
        // 0.7 in (1/2, 1]: f0(-0.2) = -0.4, f(0.7) = 0.75 - 0.1 = 0.65.
        assert!((time_one_map_radial(0.7).unwrap() - 0.65).abs() < 1e-12);
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(time_one_map_radial(-0.1).is_err());
        assert!(time_one_map_radial(1.1).is_err());
    }

    #[test]
    fn strictly_increasing_and_fixes_only_the_registry() {
        // sign changes of f(x)-x happen exactly at the dyadic fixed points
        let mut prev = 0.0f64;
        let mut prev_f = 0.0f64;
        for i in 1..=4096 {
            let r = i as f64 / 4096.0;
            let f = eval(r);
            assert!(f > prev_f, "f not increasing at {r}");
            // within a band half, f - id keeps one sign
            if snap_fixed(r).is_none() && snap_fixed(prev.max(1e-12)).is_none() && prev > 0.0 {
                let (lo, hi) = bracket(r);
                if prev > lo && r < hi {
                    let s1 = (eval(prev) - prev).signum();
                    let s2 = (f - r).signum();
                    assert_eq!(s1, s2, "sign change inside ({lo}, {hi}) at {r}");
                }
            }
            prev = r;
            prev_f = f;
        }
    }

    #[test]
    fn inverse_roundtrip() {
        for i in 1..1000 {
            let r = i as f64 / 1000.0;
            let y = eval(r);
            assert!((eval_inv(y) - r).abs() < 1e-12, "roundtrip failed at {r}");
        }
    }

    #[test]
    fn finite_difference_slopes_at_fixed_points() {
        let h = 1e-6;
        for n in 0..4 {
            let attract = 2f64.powi(-n);
            let lo = if attract + h <= 1.0 { attract + h } else { attract };
            let slope = (eval(lo) - eval(attract - h)) / (lo - (attract - h));
            assert!(
                (slope - 0.5).abs() < 0.05,
                "attracting slope at 2^-{n} was {slope}"
            );
            let repel = 3.0 * 2f64.powi(-(n + 2));
            let slope = (eval(repel + h) - eval(repel - h)) / (2.0 * h);
            assert!(
                (slope - 2.0).abs() < 0.05,
                "repelling slope at 3·2^-{} was {slope}",
                n + 2
            );
        }
    }
}
