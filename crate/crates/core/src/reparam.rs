//! Orientation-preserving time reparametrizations of ℝ, stored as monotone
//! piecewise-linear knot lists with affine tails of positive slope. The
//! slope-constrained class (all difference quotients within ε of 1) is
//! decidable exactly for this representation: pairwise quotients are convex
//! combinations of segment slopes, so scanning segments suffices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimal increment between consecutive knots, in both coordinates; guards
/// invertibility under floating point.
pub const KNOT_STRICTNESS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reparametrization {
    knots: Vec<(f64, f64)>,
    tail_slopes: (f64, f64),
}

/// Outcome of a slope-class check, with the extremal segment as witness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepEpsReport {
    pub ok: bool,
    pub worst_slope: f64,
    /// t-interval on which the extremal slope is attained.
    pub witness: (f64, f64),
}

pub fn make_piecewise_linear(
    knots: Vec<(f64, f64)>,
    tail_slopes: (f64, f64),
) -> Result<Reparametrization> {
    if knots.is_empty() {
        return Err(Error::param("need at least one knot"));
    }
    if !(tail_slopes.0 > 0.0 && tail_slopes.1 > 0.0) {
        return Err(Error::param("tail slopes must be positive"));
    }
    for w in knots.windows(2) {
        if w[1].0 - w[0].0 < KNOT_STRICTNESS || w[1].1 - w[0].1 < KNOT_STRICTNESS {
            return Err(Error::param(format!(
                "knots must increase by at least {KNOT_STRICTNESS} in both coordinates: {:?} -> {:?}",
                w[0], w[1]
            )));
        }
    }
    Ok(Reparametrization { knots, tail_slopes })
}

pub fn identity() -> Reparametrization {
    Reparametrization {
        knots: vec![(0.0, 0.0)],
        tail_slopes: (1.0, 1.0),
    }
}

impl Reparametrization {
    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn tail_slopes(&self) -> (f64, f64) {
        self.tail_slopes
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        let (t0, v0) = k[0];
        if t <= t0 {
            return v0 + self.tail_slopes.0 * (t - t0);
        }
        let (tn, vn) = k[k.len() - 1];
        if t >= tn {
            return vn + self.tail_slopes.1 * (t - tn);
        }
        let i = k.partition_point(|&(u, _)| u <= t) - 1;
        let (a, va) = k[i];
        let (b, vb) = k[i + 1];
        va + (t - a) / (b - a) * (vb - va)
    }

    pub fn eval_inv(&self, v: f64) -> f64 {
        self.invert().eval(v)
    }

    /// h ↦ h⁻¹: swap knot coordinates, reciprocal tail slopes.
    pub fn invert(&self) -> Reparametrization {
        Reparametrization {
            knots: self.knots.iter().map(|&(t, v)| (v, t)).collect(),
            tail_slopes: (1.0 / self.tail_slopes.0, 1.0 / self.tail_slopes.1),
        }
    }

    /// self ∘ other (first apply `other`).
    pub fn compose(&self, other: &Reparametrization) -> Reparametrization {
        let mut ts: Vec<f64> = other.knots.iter().map(|&(t, _)| t).collect();
        let other_inv = other.invert();
        for &(u, _) in &self.knots {
            ts.push(other_inv.eval(u));
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ts.dedup_by(|a, b| (*a - *b).abs() < KNOT_STRICTNESS);
        let knots: Vec<(f64, f64)> = ts
            .into_iter()
            .map(|t| (t, self.eval(other.eval(t))))
            .collect();
        let mut out = Vec::with_capacity(knots.len());
        for kv in knots {
            if let Some(&(pt, pv)) = out.last() {
                if kv.0 - pt < KNOT_STRICTNESS || kv.1 - pv < KNOT_STRICTNESS {
                    continue;
                }
            }
            out.push(kv);
        }
        Reparametrization {
            knots: out,
            tail_slopes: (
                self.tail_slopes.0 * other.tail_slopes.0,
                self.tail_slopes.1 * other.tail_slopes.1,
            ),
        }
    }

    /// h'(t) = h(t - dt) + dv.
    pub fn shifted(&self, dt: f64, dv: f64) -> Reparametrization {
        Reparametrization {
            knots: self.knots.iter().map(|&(t, v)| (t + dt, v + dv)).collect(),
            tail_slopes: self.tail_slopes,
        }
    }

    /// Drop interior knots that lie on the line through their neighbors;
    /// leaves the function unchanged up to 1e-12 absolute.
    pub fn simplified(&self) -> Reparametrization {
        if self.knots.len() <= 2 {
            return self.clone();
        }
        let mut out: Vec<(f64, f64)> = vec![self.knots[0]];
        for i in 1..self.knots.len() - 1 {
            let (ta, va) = *out.last().unwrap();
            let (tb, vb) = self.knots[i];
            let (tc, vc) = self.knots[i + 1];
            let interp = va + (tb - ta) / (tc - ta) * (vc - va);
            if (vb - interp).abs() > 1e-12 * (1.0 + vb.abs()) {
                out.push((tb, vb));
            }
        }
        out.push(*self.knots.last().unwrap());
        Reparametrization {
            knots: out,
            tail_slopes: self.tail_slopes,
        }
    }

    /// Segment slopes (with t-spans) intersecting the open interval (a, b).
    fn slopes_over(&self, a: f64, b: f64) -> Vec<(f64, (f64, f64))> {
        let mut out = Vec::new();
        let k = &self.knots;
        let (t0, _) = k[0];
        if a < t0 {
            out.push((self.tail_slopes.0, (f64::NEG_INFINITY, t0)));
        }
        for w in k.windows(2) {
            let (ta, va) = w[0];
            let (tb, vb) = w[1];
            if ta < b && tb > a {
                out.push(((vb - va) / (tb - ta), (ta, tb)));
            }
        }
        let (tn, _) = k[k.len() - 1];
        if b > tn {
            out.push((self.tail_slopes.1, (tn, f64::INFINITY)));
        }
        out
    }
}

/// Check membership in the slope class over [a, b]: every difference quotient
/// of h over the interval lies in (1-eps, 1+eps). Exact for piecewise-linear
/// h. The witness reports where the extremal slope is attained.
pub fn verify_rep_eps(h: &Reparametrization, eps: f64, domain: (f64, f64)) -> RepEpsReport {
    assert!(eps > 0.0, "eps must be positive");
    let (a, b) = domain;
    let mut worst = 1.0f64;
    let mut witness = (a, b);
    for (slope, span) in h.slopes_over(a, b) {
        if (slope - 1.0).abs() > (worst - 1.0).abs() {
            worst = slope;
            witness = (span.0.max(a), span.1.min(b));
        }
    }
    RepEpsReport {
        ok: (worst - 1.0).abs() < eps,
        worst_slope: worst,
        witness,
    }
}

/// Affine rescale of h on [0, t1] to prescribed endpoints 0 and g1, with
/// identity-slope tails outside: t for t <= 0, g1 + t - t1 for t >= t1.
pub fn rescale_to_endpoints(h: &Reparametrization, t1: f64, g1: f64) -> Result<Reparametrization> {
    if !(t1 > 0.0) {
        return Err(Error::param(format!("t1 must be positive, got {t1}")));
    }
    if !(g1 > 0.0) {
        return Err(Error::param(format!("target g1 must be positive, got {g1}")));
    }
    let h0 = h.eval(0.0);
    let h1 = h.eval(t1);
    if h1 - h0 <= KNOT_STRICTNESS {
        return Err(Error::Degenerate(format!(
            "reparametrization is constant on [0, {t1}] (h(0)={h0}, h(t1)={h1})"
        )));
    }
    let scale = g1 / (h1 - h0);
    let mut knots = vec![(0.0, 0.0)];
    for &(t, v) in h.knots() {
        if t > 0.0 && t < t1 {
            let kv = (t, scale * (v - h0));
            let &(pt, pv) = knots.last().unwrap();
            if kv.0 - pt >= KNOT_STRICTNESS && kv.1 - pv >= KNOT_STRICTNESS {
                knots.push(kv);
            }
        }
    }
    let &(pt, pv) = knots.last().unwrap();
    if t1 - pt < KNOT_STRICTNESS || g1 - pv < KNOT_STRICTNESS {
        knots.pop();
    }
    knots.push((t1, g1));
    Ok(Reparametrization {
        knots,
        tail_slopes: (1.0, 1.0),
    })
}

/// Join piecewise reparametrizations into one monotone map. `pieces` are
/// (breakpoint-interval, map) in increasing order; consecutive pieces must
/// agree at shared breakpoints within `tol` (values snap to the left piece).
/// The first piece rules (-inf, its right end], the last [its left end, inf).
pub fn splice(pieces: &[((f64, f64), Reparametrization)]) -> Result<Reparametrization> {
    const SNAP_TOL: f64 = 1e-9;
    if pieces.is_empty() {
        return Err(Error::param("no pieces to splice"));
    }
    for w in pieces.windows(2) {
        let ((_, r1), h1) = (&w[0].0, &w[0].1);
        let ((l2, _), h2) = (&w[1].0, &w[1].1);
        if (r1 - l2).abs() > SNAP_TOL {
            return Err(Error::Splice(format!(
                "pieces do not abut: right end {r1} vs left end {l2}"
            )));
        }
        let v1 = h1.eval(*r1);
        let v2 = h2.eval(*r1);
        if (v1 - v2).abs() > SNAP_TOL {
            return Err(Error::Splice(format!(
                "piece values differ by {} at breakpoint {r1}",
                (v1 - v2).abs()
            )));
        }
    }
    let mut knots: Vec<(f64, f64)> = Vec::new();
    let push = |kv: (f64, f64), knots: &mut Vec<(f64, f64)>| {
        if let Some(&(pt, pv)) = knots.last() {
            if kv.0 - pt < KNOT_STRICTNESS || kv.1 - pv < KNOT_STRICTNESS {
                return;
            }
        }
        knots.push(kv);
    };
    for (i, ((lo, hi), h)) in pieces.iter().enumerate() {
        // breakpoint itself always becomes a knot, valued by the left piece
        if i > 0 {
            push((*lo, pieces[i - 1].1.eval(*lo)), &mut knots);
        }
        for &(t, v) in h.knots() {
            if t > *lo + KNOT_STRICTNESS && t < *hi - KNOT_STRICTNESS {
                push((t, v), &mut knots);
            } else if i == 0 && t <= *lo {
                push((t, v), &mut knots);
            } else if i == pieces.len() - 1 && t >= *hi {
                push((t, v), &mut knots);
            }
        }
    }
    if knots.is_empty() {
        // all pieces were pure tails (e.g. identities); pin one knot
        let (lo, _) = pieces[0].0;
        let t = if lo.is_finite() { lo } else { 0.0 };
        knots.push((t, pieces[0].1.eval(t)));
    }
    let first = &pieces[0].1;
    let last = &pieces[pieces.len() - 1].1;
    make_piecewise_linear(knots, (first.tail_slopes.0, last.tail_slopes.1))
        .map_err(|e| Error::Splice(format!("spliced map not monotone: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_evaluates_everywhere() {
        let id = identity();
        for &t in &[-5.0, 0.0, 0.5, 3.7] {
            assert_eq!(id.eval(t), t);
        }
        let id2 = make_piecewise_linear(vec![(0.0, 0.0), (1.0, 1.0)], (1.0, 1.0)).unwrap();
        for &t in &[-5.0, 0.25, 2.0] {
            assert!((id2.eval(t) - t).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_examples() {
        let h = make_piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0)], (1.0, 1.0)).unwrap();
        assert!((h.eval(0.5) - 1.0).abs() < 1e-15);
        let h = make_piecewise_linear(vec![(0.0, 0.0), (1.0, 0.9), (2.0, 2.0)], (1.0, 1.0)).unwrap();
        assert!((h.eval(1.5) - 1.45).abs() < 1e-15);
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(make_piecewise_linear(vec![(0.0, 0.0), (1.0, 0.0)], (1.0, 1.0)).is_err());
        assert!(make_piecewise_linear(vec![(0.0, 0.0), (0.0, 1.0)], (1.0, 1.0)).is_err());
        assert!(make_piecewise_linear(vec![(0.0, 0.0)], (0.0, 1.0)).is_err());
    }

    #[test]
    fn invert_halves_doubling() {
        let h = make_piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0)], (2.0, 2.0)).unwrap();
        let inv = h.invert();
        for &t in &[-1.0, 0.3, 0.9, 4.0] {
            assert!((inv.eval(t) - t / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rep_eps_examples() {
        assert!(verify_rep_eps(&identity(), 0.01, (-10.0, 10.0)).ok);
        let doubling = make_piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0)], (2.0, 2.0)).unwrap();
        let rep = verify_rep_eps(&doubling, 0.5, (0.0, 1.0));
        assert!(!rep.ok);
        assert!((rep.worst_slope - 2.0).abs() < 1e-12);
        let wobble =
            make_piecewise_linear(vec![(0.0, 0.0), (1.0, 0.9), (2.0, 2.0)], (1.0, 1.0)).unwrap();
        assert!(verify_rep_eps(&wobble, 0.2, (0.0, 2.0)).ok);
        assert!(!verify_rep_eps(&wobble, 0.05, (0.0, 2.0)).ok);
    }

    #[test]
    fn rescale_examples() {
        let id = identity();
        let g = rescale_to_endpoints(&id, 2.0, 2.0).unwrap();
        for &t in &[-1.0, 0.5, 1.7, 3.0] {
            assert!((g.eval(t) - t).abs() < 1e-12);
        }
        // doubling on [0, 1] rescaled to endpoints (0, 1): slopes halved inside
        let doubling = make_piecewise_linear(vec![(0.0, 0.0), (1.0, 2.0)], (1.0, 1.0)).unwrap();
        let g = rescale_to_endpoints(&doubling, 1.0, 1.0).unwrap();
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.eval(1.0), 1.0);
        assert!((g.eval(0.5) - 0.5).abs() < 1e-12);
        // exact endpoints regardless of h
        let h = make_piecewise_linear(
            vec![(0.0, 0.3), (0.7, 1.1), (2.0, 2.4), (3.0, 5.0)],
            (0.7, 2.0),
        )
        .unwrap();
        let g = rescale_to_endpoints(&h, 2.5, 3.25).unwrap();
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.eval(2.5), 3.25);
        assert_eq!(g.eval(3.5), 3.25 + 1.0);
    }

    #[test]
    fn splice_identity_pieces() {
        let spliced = splice(&[
            ((f64::NEG_INFINITY, 0.0), identity()),
            ((0.0, f64::INFINITY), identity()),
        ])
        .unwrap();
        for &t in &[-3.0, 0.0, 2.0] {
            assert!((spliced.eval(t) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn splice_mismatch_detected() {
        let off = identity().shifted(0.0, 1e-6);
        let err = splice(&[
            ((f64::NEG_INFINITY, 0.0), identity()),
            ((0.0, f64::INFINITY), off),
        ]);
        assert!(matches!(err, Err(Error::Splice(_))));
    }

    #[test]
    fn splice_three_piece_form() {
        // identity tail, slope-1/2 middle on [0, 2], shifted identity tail
        let mid = make_piecewise_linear(vec![(0.0, 0.0), (2.0, 1.0)], (1.0, 1.0)).unwrap();
        let tail = identity().shifted(0.0, -1.0); // t - 1 agrees with mid at t = 2
        let h = splice(&[
            ((f64::NEG_INFINITY, 0.0), identity()),
            ((0.0, 2.0), mid),
            ((2.0, f64::INFINITY), tail),
        ])
        .unwrap();
        assert!((h.eval(-1.0) + 1.0).abs() < 1e-12);
        assert!((h.eval(1.0) - 0.5).abs() < 1e-12);
        assert!((h.eval(3.0) - 2.0).abs() < 1e-12);
    }

    fn arb_reparam(max_knots: usize) -> impl Strategy<Value = Reparametrization> {
        (2..max_knots, any::<u64>()).prop_map(|(n, seed)| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = -2.0;
            let mut v = -2.0;
            let mut knots = Vec::new();
            for _ in 0..n {
                t += rng.gen::<f64>() * 0.5 + 1e-3;
                v += rng.gen::<f64>() * 0.5 + 1e-3;
                knots.push((t, v));
            }
            make_piecewise_linear(
                knots,
                (rng.gen::<f64>() + 0.1, rng.gen::<f64>() + 0.1),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(h in arb_reparam(50)) {
            let round = h.compose(&h.invert());
            for i in 0..100 {
                let t = -3.0 + i as f64 * 0.07;
                prop_assert!((round.eval(t) - t).abs() < 1e-9);
            }
        }

        #[test]
        fn eval_monotone(h in arb_reparam(30)) {
            let mut prev = h.eval(-4.0);
            for i in 1..200 {
                let t = -4.0 + i as f64 * 0.05;
                let v = h.eval(t);
                prop_assert!(v > prev);
                prev = v;
            }
        }

        /// Oracle equivalence: the segment-slope check agrees with brute force
        /// over all knot pairs (and a dense sample) on randomized maps.
        #[test]
        fn rep_eps_matches_brute_force(h in arb_reparam(50), eps in 0.05f64..1.0) {
            let (a, b) = (-3.0, 3.0);
            let fast = verify_rep_eps(&h, eps, (a, b));
            let mut pts: Vec<f64> = h.knots().iter().map(|k| k.0).filter(|t| (a..=b).contains(t)).collect();
            pts.push(a);
            pts.push(b);
            for i in 0..60 {
                pts.push(a + (b - a) * i as f64 / 59.0);
            }
            pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut brute_ok = true;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    if pts[j] - pts[i] < 1e-9 {
                        continue;
                    }
                    let q = (h.eval(pts[j]) - h.eval(pts[i])) / (pts[j] - pts[i]);
                    if (q - 1.0).abs() >= eps {
                        brute_ok = false;
                    }
                }
            }
            prop_assert_eq!(fast.ok, brute_ok);
        }

        /// Composition slope ranges multiply.
        #[test]
        fn compose_slope_bounds(h1 in arb_reparam(20), h2 in arb_reparam(20)) {
            let bounds = |h: &Reparametrization| {
                let slopes = h.slopes_over(-10.0, 10.0);
                let lo = slopes.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
                let hi = slopes.iter().map(|s| s.0).fold(0.0f64, f64::max);
                (lo, hi)
            };
            let (l1, u1) = bounds(&h1);
            let (l2, u2) = bounds(&h2);
            let c = h1.compose(&h2);
            let (lc, uc) = bounds(&c);
            prop_assert!(lc >= l1 * l2 - 1e-9);
            prop_assert!(uc <= u1 * u2 + 1e-9);
        }
    }

    /// Closure of the slope class under endpoint rescaling when the scale
    /// factor is controlled: (1+scale dev)(1+slope dev) stays within eps.
    #[test]
    fn rep_eps_closed_under_controlled_rescale() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let eps_h = 0.1;
            let eps_scale = 0.08;
            let eps = 0.2; // (1.08)(1.1) = 1.188 <= 1.2
            let mut t = 0.0;
            let mut v = 0.0;
            let mut knots = vec![(0.0, 0.0)];
            for _ in 0..10 {
                let dt = rng.gen::<f64>() * 0.5 + 0.1;
                t += dt;
                v += dt * (1.0 + eps_h * (rng.gen::<f64>() * 2.0 - 1.0) * 0.99);
                knots.push((t, v));
            }
            let h = make_piecewise_linear(knots, (1.0, 1.0)).unwrap();
            let scale = 1.0 + eps_scale * (rng.gen::<f64>() * 2.0 - 1.0);
            let g1 = h.eval(t) * scale;
            let g = rescale_to_endpoints(&h, t, g1).unwrap();
            let rep = verify_rep_eps(&g, eps, (0.0, t));
            assert!(rep.ok, "worst slope {} after scale {scale}", rep.worst_slope);
        }
    }

    /// If h is in the slope class at eps/4 on a pitch-T grid and g agrees with
    /// h at grid endpoints within 2T, rescaling keeps sup |g~ - h| <= 2T.
    #[test]
    fn rescale_sup_deviation_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let eps = 0.4;
            let t_pitch = 0.25;
            let n = 24;
            let t1 = t_pitch * n as f64;
            let mut knots = vec![(0.0, 0.0)];
            let mut v = 0.0;
            for i in 1..=n {
                v += t_pitch * (1.0 + (eps / 4.0) * (rng.gen::<f64>() * 2.0 - 1.0) * 0.99);
                knots.push((i as f64 * t_pitch, v));
            }
            let h = make_piecewise_linear(knots, (1.0, 1.0)).unwrap();
            let g1 = h.eval(t1) + (rng.gen::<f64>() * 2.0 - 1.0) * 2.0 * t_pitch * 0.99;
            if g1 <= 0.0 {
                continue;
            }
            let gt = rescale_to_endpoints(&h, t1, g1).unwrap();
            let mut sup: f64 = 0.0;
            for i in 0..=(n * 8) {
                let t = t1 * i as f64 / (n * 8) as f64;
                sup = sup.max((gt.eval(t) - (h.eval(t) - h.eval(0.0))).abs());
            }
            assert!(sup <= 2.0 * t_pitch + 1e-9, "sup deviation {sup}");
        }
    }
}
