//! Pseudotrajectories in two forms: the step form (anchor points at multiples
//! of T0, flowed exactly in between, jumps below the defect at anchor times)
//! and the continuous sampled form (unit-time flow defect below d on a grid).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowSpec;
use crate::space::MetricPoint;

/// Sampling pitch for continuous-form checks, as a fraction of T0.
pub fn ps_grid_pitch(t0: f64) -> f64 {
    t0 / 8.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepPseudotrajectory {
    /// Anchor spacing T0 in (0, 1).
    pub t0_step: f64,
    pub n_min: i64,
    pub n_max: i64,
    /// Anchor ξ(n·T0) for n = n_min..=n_max.
    pub anchors: Vec<MetricPoint>,
    /// Declared defect class: jumps at anchor times stay strictly below this.
    pub defect: f64,
    /// Fingerprint of the flow the trajectory was built against.
    pub flow_id: u64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuousPseudotrajectory {
    pub sample_times: Vec<f64>,
    pub samples: Vec<MetricPoint>,
    pub defect: f64,
}

#[derive(Clone, Copy, Debug)]
pub enum JumpModel<'a> {
    /// Perturbation drawn uniformly from the chart ball of radius < d.
    UniformBall,
    /// Deterministic push of size 0.9·d toward the target, in chart
    /// coordinates (radially toward a target radius on the disk, along the
    /// shorter arc on the circle).
    Directed(&'a MetricPoint),
}

impl StepPseudotrajectory {
    pub fn window(&self) -> (f64, f64) {
        (self.n_min as f64 * self.t0_step, self.n_max as f64 * self.t0_step)
    }

    pub fn anchor(&self, n: i64) -> &MetricPoint {
        &self.anchors[(n - self.n_min) as usize]
    }

    /// Anchor index and offset for a time inside the window; anchor times
    /// within 1e-9·T0 snap to the anchor itself.
    fn locate(&self, t: f64) -> Result<(i64, f64)> {
        let u = t / self.t0_step;
        let mut n = u.floor() as i64;
        if u - u.floor() > 1.0 - 1e-9 {
            n += 1;
        }
        if n > self.n_max && (t - self.n_max as f64 * self.t0_step).abs() < 1e-9 * self.t0_step {
            n = self.n_max;
        }
        if n < self.n_min || n > self.n_max {
            return Err(Error::Window(format!(
                "time {t} outside the trajectory window [{}, {}]",
                self.n_min as f64 * self.t0_step,
                self.n_max as f64 * self.t0_step
            )));
        }
        let off = (t - n as f64 * self.t0_step).max(0.0);
        Ok((n, off))
    }

    /// ξ(t): flow exactly from the governing anchor.
    pub fn eval(&self, flow: &FlowSpec, t: f64) -> Result<Vec<f64>> {
        let (n, off) = self.locate(t)?;
        let a = self.anchor(n);
        Ok(if off == 0.0 {
            a.coords.clone()
        } else {
            flow.eval_vec(off, &a.coords)
        })
    }

    /// Largest jump actually present at interior anchor times.
    pub fn measured_defect(&self, flow: &FlowSpec) -> f64 {
        let mut worst: f64 = 0.0;
        let mut out = vec![0.0; flow.dim()];
        for w in self.anchors.windows(2) {
            flow.eval_into(self.t0_step, &w[0].coords, &mut out);
            worst = worst.max(flow.distance(&out, &w[1].coords));
        }
        worst
    }

    pub fn from_anchors(
        flow: &FlowSpec,
        t0_step: f64,
        n_min: i64,
        anchors: Vec<MetricPoint>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::param("no anchors"));
        }
        if !(t0_step > 0.0 && t0_step < 1.0) {
            return Err(Error::param(format!("T0 must lie in (0,1), got {t0_step}")));
        }
        let n_max = n_min + anchors.len() as i64 - 1;
        let mut xi = StepPseudotrajectory {
            t0_step,
            n_min,
            n_max,
            anchors,
            defect: 0.0,
            flow_id: flow.fingerprint(),
            seed,
        };
        let measured = xi.measured_defect(flow);
        xi.defect = measured * (1.0 + 1e-9) + 1e-15;
        Ok(xi)
    }

    /// The trajectory t ↦ ξ(-t), a step pseudotrajectory of the reversed
    /// flow; its defect is remeasured (jumps transport under the flow).
    pub fn time_reversed(&self, reversed_flow: &FlowSpec) -> Result<StepPseudotrajectory> {
        let anchors: Vec<MetricPoint> = self.anchors.iter().rev().cloned().collect();
        StepPseudotrajectory::from_anchors(reversed_flow, self.t0_step, -self.n_max, anchors, self.seed)
    }

    /// Restriction to anchor range [lo, hi].
    pub fn restrict(&self, lo: i64, hi: i64) -> Result<StepPseudotrajectory> {
        if lo < self.n_min || hi > self.n_max || lo > hi {
            return Err(Error::Window(format!(
                "restriction [{lo}, {hi}] outside [{}, {}]",
                self.n_min, self.n_max
            )));
        }
        Ok(StepPseudotrajectory {
            t0_step: self.t0_step,
            n_min: lo,
            n_max: hi,
            anchors: self.anchors[(lo - self.n_min) as usize..=(hi - self.n_min) as usize].to_vec(),
            defect: self.defect,
            flow_id: self.flow_id,
            seed: self.seed,
        })
    }
}

impl ContinuousPseudotrajectory {
    pub fn window(&self) -> (f64, f64) {
        (self.sample_times[0], *self.sample_times.last().unwrap())
    }

    /// Index of the sample at time t (within 1e-9); the sampled form is only
    /// evaluated at its own grid.
    pub fn index_at(&self, t: f64) -> Result<usize> {
        let i = self.sample_times.partition_point(|&u| u < t - 1e-9);
        if i < self.sample_times.len() && (self.sample_times[i] - t).abs() < 1e-9 {
            Ok(i)
        } else {
            Err(Error::Window(format!("time {t} is not on the sample grid")))
        }
    }

    /// Sample a step pseudotrajectory on a uniform grid of the given pitch.
    pub fn from_step(
        flow: &FlowSpec,
        xi: &StepPseudotrajectory,
        pitch: f64,
    ) -> Result<ContinuousPseudotrajectory> {
        if pitch <= 0.0 {
            return Err(Error::param("pitch must be positive"));
        }
        let (lo, hi) = xi.window();
        let n = ((hi - lo) / pitch).round() as usize;
        let mut sample_times = Vec::with_capacity(n + 1);
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = lo + k as f64 * pitch;
            let t = t.min(hi);
            sample_times.push(t);
            samples.push(MetricPoint {
                coords: xi.eval(flow, t)?,
                space_id: flow.space().id(),
            });
            if t >= hi {
                break;
            }
        }
        Ok(ContinuousPseudotrajectory {
            sample_times,
            samples,
            defect: xi.defect,
        })
    }
}

/// Generate a step pseudotrajectory: anchors built forward from x0 by exact
/// T0-flow plus a jump, and backward with backward flow plus a jump shrunk
/// until the forward defect stays below d. Deterministic for a fixed seed.
pub fn generate_pt(
    flow: &FlowSpec,
    x0: &MetricPoint,
    d: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
    jump_model: JumpModel,
) -> Result<StepPseudotrajectory> {
    if d <= 0.0 {
        return Err(Error::param(format!("defect bound must be positive, got {d}")));
    }
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::param(format!("T0 must lie in (0,1), got {t0}")));
    }
    let (n_min, n_max) = window;
    if n_min > 0 || n_max < 0 || n_min == n_max {
        return Err(Error::param(format!(
            "window [{n_min}, {n_max}] must be nonempty and contain 0"
        )));
    }
    if x0.space_id != flow.space().id() || !flow.space().contains(&x0.coords) {
        return Err(Error::domain("starting point outside the flow's domain".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = flow.dim();
    let space = flow.space();

    let draw_jump = |rng: &mut ChaCha8Rng, from: &[f64]| -> Vec<f64> {
        match jump_model {
            JumpModel::UniformBall => {
                // uniform in the chart ball of radius 0.999·d (max-norm over factors)
                let mut v = vec![0.0; dim];
                loop {
                    for c in v.iter_mut() {
                        *c = (rng.gen::<f64>() * 2.0 - 1.0) * d * 0.999;
                    }
                    if space.chart_norm(&v) < d * 0.999 {
                        break;
                    }
                }
                v
            }
            JumpModel::Directed(target) => {
                let mut v = vec![0.0; dim];
                space.chart_displacement(from, &target.coords, &mut v);
                let n = space.chart_norm(&v);
                if n < 1e-300 {
                    return vec![0.0; dim];
                }
                let scale = (0.9 * d).min(n) / n;
                v.iter_mut().for_each(|c| *c *= scale);
                v
            }
        }
    };

    let total = (n_max - n_min + 1) as usize;
    let mut anchors = vec![MetricPoint { coords: Vec::new(), space_id: x0.space_id }; total];
    let idx = |n: i64| (n - n_min) as usize;
    anchors[idx(0)] = x0.clone();

    // forward half
    let mut cur = x0.coords.clone();
    for n in 1..=n_max {
        let flowed = flow.eval_vec(t0, &cur);
        let jump = draw_jump(&mut rng, &flowed);
        let mut next = flowed.clone();
        space.displace_capped(&mut next, &jump, d * 0.9995);
        debug_assert!(flow.distance(&flowed, &next) < d);
        anchors[idx(n)] = MetricPoint { coords: next.clone(), space_id: x0.space_id };
        cur = next;
    }

    // backward half: shrink the jump until the forward defect is below d
    let mut cur = x0.coords.clone();
    for n in (n_min..0).rev() {
        let flowed_back = flow.eval_vec(-t0, &cur);
        let mut jump = draw_jump(&mut rng, &flowed_back);
        let prev = loop {
            let mut cand = flowed_back.clone();
            space.displace_capped(&mut cand, &jump, d * 0.9995);
            let fwd = flow.eval_vec(t0, &cand);
            if flow.distance(&fwd, &cur) < d * 0.999 {
                break cand;
            }
            jump.iter_mut().for_each(|c| *c *= 0.5);
            if space.chart_norm(&jump) < 1e-300 {
                break flowed_back.clone();
            }
        };
        anchors[idx(n)] = MetricPoint { coords: prev.clone(), space_id: x0.space_id };
        cur = prev;
    }

    let mut xi = StepPseudotrajectory {
        t0_step: t0,
        n_min,
        n_max,
        anchors,
        defect: d,
        flow_id: flow.fingerprint(),
        seed: Some(seed),
    };
    // by construction the measured defect stays below d
    let measured = xi.measured_defect(flow);
    debug_assert!(measured < d, "measured defect {measured} >= {d}");
    xi.defect = d;
    Ok(xi)
}

/// Continuous-form defect of a trajectory: max over grid times t and
/// s ∈ [0, 1] of dist(ξ(t+s), φ(s, ξ(t))). The caller compares against d.
pub enum PseudoInput<'a> {
    Step(&'a StepPseudotrajectory),
    Continuous(&'a ContinuousPseudotrajectory),
}

pub fn validate_ps(flow: &FlowSpec, xi: &PseudoInput) -> Result<f64> {
    match xi {
        PseudoInput::Step(step) => {
            let pitch = ps_grid_pitch(step.t0_step);
            let cont = ContinuousPseudotrajectory::from_step(flow, step, pitch)?;
            validate_continuous(flow, &cont)
        }
        PseudoInput::Continuous(cont) => validate_continuous(flow, cont),
    }
}

fn validate_continuous(flow: &FlowSpec, xi: &ContinuousPseudotrajectory) -> Result<f64> {
    let n = xi.sample_times.len();
    if n < 2 {
        return Err(Error::Window("trajectory has fewer than two samples".to_string()));
    }
    let mut worst: f64 = 0.0;
    let mut cur = vec![0.0; flow.dim()];
    for i in 0..n {
        cur.copy_from_slice(&xi.samples[i].coords);
        let t_i = xi.sample_times[i];
        for j in (i + 1)..n {
            let s = xi.sample_times[j] - t_i;
            if s > 1.0 + 1e-12 {
                break;
            }
            let step = xi.sample_times[j] - xi.sample_times[j - 1];
            let prev = cur.clone();
            flow.eval_into(step, &prev, &mut cur);
            worst = worst.max(flow.distance(&cur, &xi.samples[j].coords));
        }
    }
    Ok(worst)
}

/// Convert a continuous pseudotrajectory into step form: anchors are the
/// samples at multiples of T0. Returns the step trajectory and the measured
/// comparability constant L = max(sup dist(ξ, ξ'), defect(ξ')) / defect(ξ).
pub fn ps_to_pt(
    flow: &FlowSpec,
    xi: &ContinuousPseudotrajectory,
    t0: f64,
) -> Result<(StepPseudotrajectory, f64)> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::param(format!("T0 must lie in (0,1), got {t0}")));
    }
    let (lo, hi) = xi.window();
    if hi - lo < 2.0 * t0 {
        return Err(Error::Window(format!(
            "window [{lo}, {hi}] spans fewer than two anchor steps of {t0}"
        )));
    }
    let n_min = (lo / t0).ceil() as i64;
    let n_max = (hi / t0).floor() as i64;
    let mut anchors = Vec::with_capacity((n_max - n_min + 1) as usize);
    for n in n_min..=n_max {
        let i = xi.index_at(n as f64 * t0)?;
        anchors.push(xi.samples[i].clone());
    }
    let step = StepPseudotrajectory::from_anchors(flow, t0, n_min, anchors, None)?;

    // sup distance between the two trajectories over the shared sample grid
    let mut sup: f64 = 0.0;
    let (slo, shi) = step.window();
    for (i, &t) in xi.sample_times.iter().enumerate() {
        if t < slo - 1e-12 || t > shi + 1e-12 {
            continue;
        }
        let v = step.eval(flow, t.clamp(slo, shi))?;
        sup = sup.max(flow.distance(&v, &xi.samples[i].coords));
    }
    let base = xi.defect.max(1e-15);
    let l_estimate = sup.max(step.measured_defect(flow)) / base;
    Ok((step, l_estimate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_disk_flow, build_north_south_circle, build_time_reversed};

    #[test]
    fn degenerate_defect_tracks_true_orbit() {
        let flow = build_disk_flow();
        let x0 = flow.point(vec![0.62, 0.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 1e-12, 0.5, (-8, 8), 42, JumpModel::UniformBall).unwrap();
        for n in -8..=8i64 {
            let t = n as f64 * 0.5;
            let truth = flow.eval_vec(t, &x0.coords);
            let got = xi.eval(&flow, t).unwrap();
            assert!(flow.distance(&truth, &got) < 1e-9, "drifted at n={n}");
        }
    }

    #[test]
    fn generated_chain_validates_below_declared_defect() {
        let flow = build_disk_flow();
        let x0 = flow.point(vec![0.45, 0.1]).unwrap();
        let d = 0.02;
        let xi = generate_pt(&flow, &x0, d, 0.5, (-10, 15), 7, JumpModel::UniformBall).unwrap();
        assert!(xi.measured_defect(&flow) < d);
        // continuous-form defect stays within the measured unit-time expansion
        let max_defect = validate_ps(&flow, &PseudoInput::Step(&xi)).unwrap();
        let samples: Vec<Vec<f64>> = xi.anchors.iter().map(|a| a.coords.clone()).collect();
        let c = unit_time_expansion(&flow, &samples);
        assert!(
            max_defect < c * d + 1e-9,
            "continuous defect {max_defect} vs C·d = {}",
            c * d
        );
    }

    /// Measured one-unit-time expansion constant of the flow near the given
    /// points: how much a small separation can grow along one time unit.
    fn unit_time_expansion(flow: &FlowSpec, pts: &[Vec<f64>]) -> f64 {
        let eta = 1e-6;
        let mut worst: f64 = 1.0;
        for p in pts {
            for k in 0..p.len() {
                let mut q = p.clone();
                q[k] += eta;
                if !flow.space().contains(&q) {
                    continue;
                }
                for s in [0.25, 0.5, 0.75, 1.0] {
                    let a = flow.eval_vec(s, p);
                    let b = flow.eval_vec(s, &q);
                    worst = worst.max(flow.distance(&a, &b) / eta);
                }
            }
        }
        worst
    }

    #[test]
    fn single_large_jump_is_witnessed() {
        let flow = build_disk_flow();
        let mut anchors = Vec::new();
        let x0 = [0.62, 0.0];
        for n in 0..=4 {
            anchors.push(MetricPoint {
                coords: flow.eval_vec(n as f64 * 0.5, &x0),
                space_id: flow.space().id(),
            });
        }
        // inject a radial jump of 0.1 at the third anchor
        let mut bumped = anchors.clone();
        for a in bumped.iter_mut().skip(3) {
            let r = (a.coords[0].powi(2) + a.coords[1].powi(2)).sqrt();
            let scale = (r + 0.1) / r;
            a.coords[0] *= scale;
            a.coords[1] *= scale;
        }
        // rebuild the tail as a true orbit of the bumped point so the only
        // jump is the injected one
        for n in 4..=4 {
            bumped[n] = MetricPoint {
                coords: flow.eval_vec(0.5, &bumped[n - 1].coords),
                space_id: flow.space().id(),
            };
        }
        let xi = StepPseudotrajectory::from_anchors(&flow, 0.5, 0, bumped, None).unwrap();
        let max_defect = validate_ps(&flow, &PseudoInput::Step(&xi)).unwrap();
        assert!(max_defect >= 0.1 - 1e-6, "jump not witnessed: {max_defect}");
    }

    #[test]
    fn directed_chain_crosses_the_slow_annulus() {
        let flow = build_disk_flow();
        // start just above the repelling circle 3/8, aim at the attracting 1/2
        let x0 = flow.point(vec![0.385, 0.0]).unwrap();
        let target = flow.point(vec![0.5, 0.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 0.02, 0.5, (0, 40), 3, JumpModel::Directed(&target))
            .unwrap();
        let last = &xi.anchors.last().unwrap().coords;
        let r = (last[0] * last[0] + last[1] * last[1]).sqrt();
        assert!((r - 0.5).abs() < 0.03, "final radius {r}");
        assert!(xi.measured_defect(&flow) < 0.02);
    }

    #[test]
    fn generation_is_reproducible() {
        let flow = build_north_south_circle();
        let x0 = flow.point(vec![2.0]).unwrap();
        let a = generate_pt(&flow, &x0, 0.01, 0.5, (-20, 20), 123, JumpModel::UniformBall).unwrap();
        let b = generate_pt(&flow, &x0, 0.01, 0.5, (-20, 20), 123, JumpModel::UniformBall).unwrap();
        for (p, q) in a.anchors.iter().zip(&b.anchors) {
            assert_eq!(p.coords, q.coords); // bit-for-bit
        }
        let c = generate_pt(&flow, &x0, 0.01, 0.5, (-20, 20), 124, JumpModel::UniformBall).unwrap();
        assert!(a.anchors.iter().zip(&c.anchors).any(|(p, q)| p.coords != q.coords));
    }

    #[test]
    fn anchor_interval_evaluation_is_exact() {
        let flow = build_disk_flow();
        let x0 = flow.point(vec![0.45, 0.2]).unwrap();
        let xi = generate_pt(&flow, &x0, 0.01, 0.5, (-5, 5), 9, JumpModel::UniformBall).unwrap();
        // evaluating inside an interval from anchor n, versus from anchor n-1
        // plus the jump, differs by at most the transported defect
        for n in -4..=4i64 {
            let t = n as f64 * 0.5 + 0.2;
            let from_n = xi.eval(&flow, t).unwrap();
            let prev = xi.anchor(n - 1);
            let from_prev = flow.eval_vec(0.5 + 0.2, &prev.coords);
            let gap = flow.distance(&from_n, &from_prev);
            assert!(gap <= 2.0 * xi.defect + 1e-9, "gap {gap} at n={n}");
        }
        // near attracting circles the transport contracts: the strict bound
        let near = flow.point(vec![0.51, 0.0]).unwrap();
        let xi = generate_pt(&flow, &near, 0.01, 0.5, (0, 6), 11, JumpModel::UniformBall).unwrap();
        for n in 1..=5i64 {
            let t = n as f64 * 0.5 + 0.3;
            let from_n = xi.eval(&flow, t).unwrap();
            let from_prev = flow.eval_vec(0.8, &xi.anchor(n - 1).coords);
            assert!(flow.distance(&from_n, &from_prev) <= xi.defect + 1e-9);
        }
    }

    #[test]
    fn ps_to_pt_roundtrip_on_true_orbit() {
        let flow = build_disk_flow();
        let x0 = flow.point(vec![0.7, 0.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 1e-13, 0.5, (0, 10), 2, JumpModel::UniformBall).unwrap();
        let cont = ContinuousPseudotrajectory::from_step(&flow, &xi, ps_grid_pitch(0.5)).unwrap();
        let (step, l) = ps_to_pt(&flow, &cont, 0.5).unwrap();
        assert!(step.measured_defect(&flow) < 1e-9);
        // defect of the input is ~1e-13 so L can be large; the absolute
        // deviation is what matters for a true orbit
        assert!(l * cont.defect < 1e-9);
    }

    #[test]
    fn ps_to_pt_contract_on_noisy_chain() {
        let flow = build_north_south_circle();
        let x0 = flow.point(vec![2.2]).unwrap();
        let d = 0.01;
        let xi = generate_pt(&flow, &x0, d, 0.5, (-10, 10), 21, JumpModel::UniformBall).unwrap();
        let cont = ContinuousPseudotrajectory::from_step(&flow, &xi, ps_grid_pitch(0.5)).unwrap();
        let (step, l) = ps_to_pt(&flow, &cont, 0.5).unwrap();
        assert!(l <= 5.0, "L estimate {l}");
        // post-contract: the step form lies in the step class at L·d and
        // stays L·d-close to the input on the shared window
        assert!(step.measured_defect(&flow) <= l * cont.defect + 1e-12);
        for (i, &t) in cont.sample_times.iter().enumerate() {
            let (lo, hi) = step.window();
            if t < lo || t > hi {
                continue;
            }
            let v = step.eval(&flow, t).unwrap();
            assert!(flow.distance(&v, &cont.samples[i].coords) <= l * cont.defect + 1e-12);
        }
    }

    #[test]
    fn window_errors() {
        let flow = build_disk_flow();
        let x0 = flow.point(vec![0.6, 0.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 0.01, 0.5, (0, 4), 1, JumpModel::UniformBall).unwrap();
        assert!(xi.eval(&flow, -0.3).is_err());
        assert!(xi.eval(&flow, 2.5).is_err()); // beyond n_max·T0 + snap
        assert!(xi.eval(&flow, 2.0).is_ok());
        let cont = ContinuousPseudotrajectory::from_step(&flow, &xi, 0.25).unwrap();
        assert!(ps_to_pt(&flow, &cont, 0.9).is_err()); // fewer than 2 steps? 2.0/0.9 = 2.2 ok
        let short = ContinuousPseudotrajectory {
            sample_times: cont.sample_times[..3].to_vec(),
            samples: cont.samples[..3].to_vec(),
            defect: 0.01,
        };
        assert!(ps_to_pt(&flow, &short, 0.5).is_err());
    }

    #[test]
    fn time_reversal_is_a_reversed_chain() {
        let flow = build_disk_flow();
        let rev = build_time_reversed(build_disk_flow());
        let x0 = flow.point(vec![0.45, 0.1]).unwrap();
        let xi = generate_pt(&flow, &x0, 0.01, 0.5, (-6, 6), 5, JumpModel::UniformBall).unwrap();
        let xr = xi.time_reversed(&rev).unwrap();
        assert_eq!(xr.n_min, -6);
        assert_eq!(xr.n_max, 6);
        for n in -6..=6i64 {
            let a = xi.eval(&flow, n as f64 * 0.5).unwrap();
            let b = xr.eval(&rev, -n as f64 * 0.5).unwrap();
            assert_eq!(a, b);
        }
        // defect within the unit-time transport factor of the original
        assert!(xr.defect <= 2.0 * xi.defect + 1e-9);
    }
}
