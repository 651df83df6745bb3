//! One-dimensional suspension flows: given a strictly increasing map with
//! isolated fixed points, build the flow whose time-1 map equals the map
//! exactly, by conjugating to unit translation on each interval between
//! adjacent fixed points.
//!
//! On such an interval pick the midpoint x0 and let x1 = f(x0). The chart T
//! sends f^k(u) to k + frac(u) for u in the fundamental domain between x0 and
//! x1 (linear there), so T∘f = T + 1 and φ(t, x) = T⁻¹(T(x) + t) satisfies
//! φ(1, ·) = f on the nose.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::radial;

/// Chart values beyond this bound clamp to the limiting fixed point; matches
/// the flow's asymptotics to well below evaluation tolerance.
pub const CHART_BOUND: f64 = 1e3;

const MAX_CHART_ITERS: usize = 2200;

pub trait Monotone1D {
    fn apply(&self, x: f64) -> f64;
    fn invert(&self, y: f64) -> f64;
    /// Adjacent fixed points strictly bracketing a non-fixed x.
    fn bracket(&self, x: f64) -> (f64, f64);
    /// Snap to a fixed point when x is one (within representation noise).
    fn snap_fixed(&self, x: f64) -> Option<f64>;
}

/// The disk flow's radial map.
#[derive(Clone, Copy, Debug)]
pub struct DiskRadial;

impl Monotone1D for DiskRadial {
    fn apply(&self, x: f64) -> f64 {
        radial::eval(x)
    }
    fn invert(&self, y: f64) -> f64 {
        radial::eval_inv(y)
    }
    fn bracket(&self, x: f64) -> (f64, f64) {
        radial::bracket(x)
    }
    fn snap_fixed(&self, x: f64) -> Option<f64> {
        radial::snap_fixed(x)
    }
}

/// Strictly increasing piecewise-linear self-homeomorphism of [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseMonotone {
    knots: Vec<(f64, f64)>,
    #[serde(skip)]
    fixed: std::sync::OnceLock<Vec<f64>>,
}

impl PiecewiseMonotone {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::param("need at least two knots"));
        }
        if (knots[0].0, knots[0].1) != (0.0, 0.0) || (knots.last().unwrap().0, knots.last().unwrap().1) != (1.0, 1.0) {
            return Err(Error::param(
                "a self-homeomorphism of [0,1] must fix 0 and 1; knots must start at (0,0) and end at (1,1)",
            ));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(Error::param("knots must be strictly increasing in both coordinates"));
            }
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if (slope - 1.0).abs() < 1e-12 && (w[0].1 - w[0].0).abs() < 1e-12 && (w[0].1 - w[0].0).abs() > 0.0 {
                return Err(Error::param("segment of fixed points is not allowed"));
            }
        }
        let pm = PiecewiseMonotone {
            knots,
            fixed: std::sync::OnceLock::new(),
        };
        // a slope-1 segment on the diagonal would be a continuum of fixed points
        for w in pm.knots.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if slope == 1.0 && w[0].1 == w[0].0 {
                return Err(Error::param("segment of fixed points is not allowed"));
            }
        }
        Ok(pm)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        if x >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let i = k.partition_point(|&(t, _)| t <= x) - 1;
        let (x0, y0) = k[i];
        let (x1, y1) = k[i + 1];
        y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    }

    pub fn eval_inv(&self, y: f64) -> f64 {
        let k = &self.knots;
        if y <= k[0].1 {
            return k[0].0;
        }
        if y >= k[k.len() - 1].1 {
            return k[k.len() - 1].0;
        }
        let i = k.partition_point(|&(_, v)| v <= y) - 1;
        let (x0, y0) = k[i];
        let (x1, y1) = k[i + 1];
        x0 + (y - y0) / (y1 - y0) * (x1 - x0)
    }

    /// Fixed points, exact per linear segment.
    pub fn fixed_points(&self) -> &[f64] {
        self.fixed.get_or_init(|| {
            let mut fps = vec![0.0];
            for w in self.knots.windows(2) {
                let (x0, y0) = w[0];
                let (x1, y1) = w[1];
                let s = (y1 - y0) / (x1 - x0);
                if (s - 1.0).abs() > 1e-15 {
                    let xf = (y0 - s * x0) / (1.0 - s);
                    if xf > x0 + 1e-15 && xf < x1 - 1e-15 {
                        fps.push(xf);
                    }
                }
            }
            fps.push(1.0);
            fps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            fps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            fps
        })
    }

    /// Slopes of the segments immediately left/right of x (None outside [0,1]).
    pub fn side_slopes(&self, x: f64) -> (Option<f64>, Option<f64>) {
        let slope_at = |u: f64| -> Option<f64> {
            if !(0.0..=1.0).contains(&u) {
                return None;
            }
            let k = &self.knots;
            let i = k.partition_point(|&(t, _)| t < u).min(k.len() - 1).max(1);
            Some((k[i].1 - k[i - 1].1) / (k[i].0 - k[i - 1].0))
        };
        (slope_at(x - 1e-12), slope_at(x + 1e-12))
    }
}

impl Monotone1D for PiecewiseMonotone {
    fn apply(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn invert(&self, y: f64) -> f64 {
        self.eval_inv(y)
    }
    fn bracket(&self, x: f64) -> (f64, f64) {
        let fps = self.fixed_points();
        let i = fps.partition_point(|&p| p < x);
        (fps[i - 1], fps[i])
    }
    fn snap_fixed(&self, x: f64) -> Option<f64> {
        self.fixed_points()
            .iter()
            .copied()
            .find(|&p| (x - p).abs() <= 1e-13)
    }
}

/// Evaluate the suspension flow of `map` at time `t` from `x`.
pub fn suspension_eval<M: Monotone1D + ?Sized>(map: &M, t: f64, x: f64) -> f64 {
    if let Some(fp) = map.snap_fixed(x) {
        return fp;
    }
    let (a, b) = map.bracket(x);
    let x0 = 0.5 * (a + b);
    let x1 = map.apply(x0);
    let forward_limit = if x1 > x0 { b } else { a };
    let backward_limit = if x1 > x0 { a } else { b };
    let tx = match chart_time(map, x, x0, x1) {
        Some(v) => v,
        // unrepresentably close to an endpoint: already at the limit
        None => return if in_front_of(x, x0, x1) { forward_limit } else { backward_limit },
    };
    let s = tx + t;
    if s >= CHART_BOUND {
        return forward_limit;
    }
    if s <= -CHART_BOUND {
        return backward_limit;
    }
    chart_point(map, s, x0, x1)
}

fn in_front_of(x: f64, x0: f64, x1: f64) -> bool {
    if x1 > x0 {
        x >= x1
    } else {
        x <= x1
    }
}

/// T(x): integer part counts applications of the map needed to reach the
/// fundamental domain, fractional part interpolates linearly inside it.
fn chart_time<M: Monotone1D + ?Sized>(map: &M, x: f64, x0: f64, x1: f64) -> Option<f64> {
    let dir = x1 > x0;
    let in_domain = |u: f64| {
        if dir {
            (x0..x1).contains(&u)
        } else {
            u <= x0 && u > x1
        }
    };
    let mut u = x;
    let mut k: i64 = 0;
    let mut iters = 0;
    while !in_domain(u) {
        if in_front_of(u, x0, x1) {
            u = map.invert(u);
            k += 1;
        } else {
            u = map.apply(u);
            k -= 1;
        }
        iters += 1;
        if iters > MAX_CHART_ITERS {
            return None;
        }
    }
    Some(k as f64 + (u - x0) / (x1 - x0))
}

/// T⁻¹(s).
fn chart_point<M: Monotone1D + ?Sized>(map: &M, s: f64, x0: f64, x1: f64) -> f64 {
    let k = s.floor();
    let frac = s - k;
    let mut u = x0 + frac * (x1 - x0);
    let k = k as i64;
    if k >= 0 {
        for _ in 0..k {
            u = map.apply(u);
        }
    } else {
        for _ in 0..(-k) {
            u = map.invert(u);
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_map() -> PiecewiseMonotone {
        PiecewiseMonotone::new(vec![(0.0, 0.0), (0.5, 0.25), (1.0, 1.0)]).unwrap()
    }

    #[test]
    fn fixed_points_solved_exactly() {
        let m = test_map();
        assert_eq!(m.fixed_points(), &[0.0, 1.0]);
        let m2 = PiecewiseMonotone::new(vec![(0.0, 0.0), (0.25, 0.5), (1.0, 1.0)]).unwrap();
        assert_eq!(m2.fixed_points(), &[0.0, 1.0]);
        // map crossing the diagonal mid-segment
        let m3 = PiecewiseMonotone::new(vec![(0.0, 0.0), (0.2, 0.4), (0.8, 0.6), (1.0, 1.0)]).unwrap();
        let fps = m3.fixed_points();
        assert_eq!(fps.len(), 3);
        assert!((fps[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(PiecewiseMonotone::new(vec![(0.0, 0.0), (0.5, 0.7), (0.6, 0.6), (1.0, 1.0)]).is_err());
        assert!(PiecewiseMonotone::new(vec![(0.0, 0.1), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn time_one_equals_map() {
        let m = test_map();
        for &x in &[0.3, 0.6, 0.9] {
            let got = suspension_eval(&m, 1.0, x);
            assert!(
                (got - m.eval(x)).abs() < 1e-9,
                "time-1 at {x}: {got} vs {}",
                m.eval(x)
            );
        }
        for i in 1..64 {
            let r = i as f64 / 64.0;
            let got = suspension_eval(&DiskRadial, 1.0, r);
            assert!((got - radial::eval(r)).abs() < 1e-9, "radial time-1 at {r}");
        }
    }

    #[test]
    fn group_law_and_identity() {
        let m = test_map();
        for &x in &[0.1, 0.3, 0.62, 0.97] {
            assert_eq!(suspension_eval(&m, 0.0, x), x);
            let half = suspension_eval(&m, 0.5, x);
            let full = suspension_eval(&m, 0.5, half);
            assert!((full - m.eval(x)).abs() < 1e-9);
            let there = suspension_eval(&m, 2.7, x);
            let back = suspension_eval(&m, -2.7, there);
            assert!((back - x).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_points_stay_fixed() {
        let m = test_map();
        for &t in &[-3.0, 0.5, 7.0] {
            assert_eq!(suspension_eval(&m, t, 0.0), 0.0);
            assert_eq!(suspension_eval(&m, t, 1.0), 1.0);
            assert_eq!(suspension_eval(&DiskRadial, t, 0.375), 0.375);
            assert_eq!(suspension_eval(&DiskRadial, t, 0.5), 0.5);
        }
    }

    #[test]
    fn long_times_clamp_to_limits() {
        let m = test_map();
        // map is below the diagonal on (0,1): forward flow sinks to 0
        assert_eq!(suspension_eval(&m, 1e6, 0.4), 0.0);
        assert_eq!(suspension_eval(&m, -1e6, 0.4), 1.0);
    }
}
