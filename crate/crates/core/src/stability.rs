//! Numerical classification of singularities (Lyapunov stable / unstable by
//! sampled orbits with explicit escape witnesses) and estimation of the sets
//! reachable by defect-d chains, via breadth-first expansion over a grid
//! cover of the space.

use std::collections::HashMap;
use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowSpec;
use crate::pseudo::{ps_grid_pitch, StepPseudotrajectory};
use crate::space::{MetricPoint, Space, TWO_PI};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// An orbit start that left the target ball within the horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeWitness {
    pub start: Vec<f64>,
    pub escape_time: f64,
    pub distance_reached: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionReport {
    pub verdict: Verdict,
    /// Per target radius V: the accepted inner radius U, when one was found.
    pub pairs: Vec<(f64, Option<f64>)>,
    pub witness: Option<EscapeWitness>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub point: MetricPoint,
    pub stable: DirectionReport,
    pub unstable: DirectionReport,
    pub horizon: f64,
}

/// Candidate inner radii: geometric schedule V/2, V/4, ..., V/256.
fn u_schedule(v: f64) -> Vec<f64> {
    (1..=8).map(|k| v / 2f64.powi(k)).collect()
}

/// Points probing the ball B(u, p): sphere directions plus interior rings.
fn ball_probes(space: &Space, p: &[f64], u: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = space.dim();
    let mut out = Vec::new();
    for ring in [1.0, 0.6, 0.3] {
        let n_dirs = if dim == 1 { 2 } else { 8 };
        for k in 0..n_dirs {
            let mut v = vec![0.0; dim];
            if dim == 1 {
                v[0] = if k == 0 { 1.0 } else { -1.0 };
            } else {
                for c in v.iter_mut() {
                    *c = rng.gen::<f64>() * 2.0 - 1.0;
                }
                let n = space.chart_norm(&v);
                if n < 1e-12 {
                    continue;
                }
                v.iter_mut().for_each(|c| *c /= n);
            }
            v.iter_mut().for_each(|c| *c *= u * ring * 0.999);
            let mut q = p.to_vec();
            space.apply_chart_displacement(&mut q, &v);
            if space.distance(&q, p) <= u {
                out.push(q);
            }
        }
    }
    out
}

fn orbit_stays_within(
    flow: &FlowSpec,
    start: &[f64],
    center: &[f64],
    v: f64,
    horizon: f64,
    dir: Direction,
) -> std::result::Result<(), EscapeWitness> {
    let steps = 200usize;
    let dt = dir.sign() * horizon / steps as f64;
    let mut cur = start.to_vec();
    let mut out = vec![0.0; flow.dim()];
    for k in 1..=steps {
        flow.eval_into(dt, &cur, &mut out);
        std::mem::swap(&mut cur, &mut out);
        let dist = flow.distance(&cur, center);
        if dist >= v {
            return Err(EscapeWitness {
                start: start.to_vec(),
                escape_time: dt * k as f64,
                distance_reached: dist,
            });
        }
    }
    Ok(())
}

fn classify_direction(
    flow: &FlowSpec,
    p: &[f64],
    radii: &[f64],
    horizon: f64,
    dir: Direction,
) -> DirectionReport {
    let mut pairs = Vec::new();
    let mut witness = None;
    let mut all_ok = true;
    for (vi, &v) in radii.iter().enumerate() {
        let mut found = None;
        let mut last_escape = None;
        for (ui, u) in u_schedule(v).into_iter().enumerate() {
            let probes = ball_probes(flow.space(), p, u, 1000 + (vi * 31 + ui) as u64);
            if probes.is_empty() {
                break;
            }
            let mut escaped = None;
            for q in &probes {
                if let Err(w) = orbit_stays_within(flow, q, p, v, horizon, dir) {
                    escaped = Some(w);
                    break;
                }
            }
            match escaped {
                None => {
                    found = Some(u);
                    break;
                }
                Some(w) => last_escape = Some(w),
            }
        }
        pairs.push((v, found));
        if found.is_none() {
            all_ok = false;
            if witness.is_none() {
                witness = last_escape;
            }
        }
    }
    let verdict = if all_ok {
        Verdict::Holds
    } else if witness.is_some() {
        Verdict::Fails
    } else {
        Verdict::Inconclusive
    };
    DirectionReport {
        verdict,
        pairs,
        witness,
    }
}

/// Classify a registered singularity by sampling orbits: for each target
/// radius V search a radius U whose sampled forward (resp. backward) orbits
/// stay inside B(V, p) up to the horizon. A direction fails only on an
/// explicit escaping orbit.
pub fn classify_singularity(
    flow: &FlowSpec,
    p: &MetricPoint,
    radii: &[f64],
    horizon: f64,
) -> Result<StabilityReport> {
    if !flow
        .singularities()
        .iter()
        .any(|s| flow.distance(&s.point.coords, &p.coords) < 1e-9)
    {
        return Err(Error::Precondition(format!(
            "{:?} is not a registered singularity",
            p.coords
        )));
    }
    if radii.is_empty() || radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::param("radii must be positive and nonempty"));
    }
    if horizon <= 0.0 {
        return Err(Error::param("horizon must be positive"));
    }
    Ok(StabilityReport {
        point: p.clone(),
        stable: classify_direction(flow, &p.coords, radii, horizon, Direction::Forward),
        unstable: classify_direction(flow, &p.coords, radii, horizon, Direction::Backward),
        horizon,
    })
}

/// Estimate of the set reachable by defect-d chains from near a point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReachableSetEstimate {
    pub center: MetricPoint,
    pub defect: f64,
    pub direction: Direction,
    /// Landing point inside each reached cell (a valid chain anchor).
    pub points: Vec<Vec<f64>>,
    pub diameter: f64,
    pub conclusive: bool,
    /// Parent cell of each reached cell in the expansion tree; seeds have none.
    pub parents: Vec<Option<usize>>,
}

struct CellIndex {
    mesh: f64,
    map: HashMap<Vec<i64>, usize>,
    circle_mod: Vec<Option<i64>>,
}

impl CellIndex {
    fn build(space: &Space, mesh: f64, cells: &[Vec<f64>]) -> CellIndex {
        let mut dims_mod = Vec::new();
        collect_circle_mods(space, mesh, &mut dims_mod);
        let mut map = HashMap::with_capacity(cells.len());
        let idx = CellIndex {
            mesh,
            map: HashMap::new(),
            circle_mod: dims_mod,
        };
        for (i, c) in cells.iter().enumerate() {
            map.insert(idx.key(c), i);
        }
        CellIndex { map, ..idx }
    }

    fn key(&self, coords: &[f64]) -> Vec<i64> {
        coords
            .iter()
            .zip(&self.circle_mod)
            .map(|(&c, &m)| {
                let k = (c / self.mesh).round() as i64;
                match m {
                    Some(n) => k.rem_euclid(n),
                    None => k,
                }
            })
            .collect()
    }

}

fn collect_circle_mods(space: &Space, mesh: f64, out: &mut Vec<Option<i64>>) {
    match space {
        Space::Interval | Space::Disk => out.extend(std::iter::repeat(None).take(space.dim())),
        Space::Circle => {
            let n = (TWO_PI / mesh).ceil() as i64;
            out.push(Some(n));
        }
        Space::Product { first, second } => {
            collect_circle_mods(first, mesh, out);
            collect_circle_mods(second, mesh, out);
        }
    }
}

/// Circle covers use pitch 2π/n rather than the requested mesh; reproduce it.
fn effective_mesh(space: &Space, mesh: f64) -> f64 {
    match space {
        Space::Circle => {
            let n = (TWO_PI / mesh).ceil() as i64;
            TWO_PI / n as f64
        }
        _ => mesh,
    }
}

/// Max pairwise distance of the reached points: exact for small sets,
/// farthest-pair double sweep (deterministic restarts) for large ones.
fn set_diameter(space: &Space, pts: &[Vec<f64>]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    if pts.len() <= 4000 {
        let mut best: f64 = 0.0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                best = best.max(space.distance(&pts[i], &pts[j]));
            }
        }
        return best;
    }
    let mut best: f64 = 0.0;
    let mut seed = 0usize;
    for _ in 0..8 {
        let mut cur = seed % pts.len();
        for _ in 0..4 {
            let (far, d) = pts
                .iter()
                .enumerate()
                .map(|(i, q)| (i, space.distance(&pts[cur], q)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            best = best.max(d);
            cur = far;
        }
        seed = seed.wrapping_mul(2654435761).wrapping_add(17);
    }
    best
}

/// Breadth-first chain reachability: a cell is reachable if a point of it
/// lies strictly within d of the time-1 flow image of a reached cell's
/// landing point; seeded by cells meeting B(d, center).
pub fn reachable_set(
    flow: &FlowSpec,
    center: &MetricPoint,
    d: f64,
    direction: Direction,
    budget: usize,
) -> Result<ReachableSetEstimate> {
    reachable_set_with_mesh(flow, center, d, direction, budget, d / 4.0)
}

pub fn reachable_set_with_mesh(
    flow: &FlowSpec,
    center: &MetricPoint,
    d: f64,
    direction: Direction,
    budget: usize,
    mesh: f64,
) -> Result<ReachableSetEstimate> {
    if d <= 0.0 || mesh <= 0.0 {
        return Err(Error::param("defect and mesh must be positive"));
    }
    let space = flow.space();
    let cells = space.grid_cover(mesh);
    let mesh_eff = effective_mesh(space, mesh);
    let index = CellIndex::build(space, mesh_eff, &cells);
    let dim = space.dim();
    let half_diag = 0.5 * mesh_eff * (dim as f64).sqrt();

    let mut reached: Vec<usize> = Vec::new();
    let mut landing: Vec<Vec<f64>> = Vec::new();
    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut cell_to_reach: HashMap<usize, usize> = HashMap::new();
    let mut queue: VecDeque<usize> = VecDeque::new();

    // nearest point of a cell's box to y, kept inside the domain
    let clamp_into_cell = |cell: &[f64], y: &[f64]| -> Vec<f64> {
        let mut q = vec![0.0; dim];
        clamp_box(space, cell, y, mesh_eff, &mut q);
        space.project(&mut q);
        q
    };

    for (i, c) in cells.iter().enumerate() {
        if space.distance(c, &center.coords) <= d + half_diag {
            let q = clamp_into_cell(c, &center.coords);
            if space.distance(&q, &center.coords) < d {
                cell_to_reach.insert(i, reached.len());
                queue.push_back(reached.len());
                reached.push(i);
                landing.push(q);
                parents.push(None);
            }
        }
    }

    let sign = direction.sign();
    let mut conclusive = true;
    let mut expansions = 0usize;
    let mut img = vec![0.0; dim];
    let reach_radius = d + half_diag;
    let steps = (reach_radius / mesh_eff).ceil() as i64 + 1;

    while let Some(ri) = queue.pop_front() {
        if expansions >= budget {
            conclusive = false;
            break;
        }
        expansions += 1;
        flow.eval_into(sign, &landing[ri], &mut img);
        // scan the lattice box around the image
        let base_key = index.key(&img);
        let mut offsets = vec![0i64; dim];
        loop {
            let key: Vec<i64> = base_key
                .iter()
                .zip(&offsets)
                .zip(&index.circle_mod)
                .map(|((&b, &o), &m)| match m {
                    Some(n) => (b + o).rem_euclid(n),
                    None => b + o,
                })
                .collect();
            if let Some(&ci) = index.map.get(&key) {
                if !cell_to_reach.contains_key(&ci) {
                    let q = clamp_into_cell(&cells[ci], &img);
                    if space.distance(&q, &img) < d {
                        cell_to_reach.insert(ci, reached.len());
                        queue.push_back(reached.len());
                        reached.push(ci);
                        landing.push(q);
                        parents.push(Some(ri));
                    }
                }
            }
            // advance the offset vector through the box [-steps, steps]^dim
            let mut k = 0;
            loop {
                if k == dim {
                    break;
                }
                offsets[k] += 1;
                if offsets[k] > steps {
                    offsets[k] = -steps;
                    k += 1;
                } else {
                    break;
                }
            }
            if k == dim {
                break;
            }
        }
    }

    let diameter = set_diameter(space, &landing);
    Ok(ReachableSetEstimate {
        center: center.clone(),
        defect: d,
        direction,
        points: landing,
        diameter,
        conclusive,
        parents,
    })
}

fn clamp_box(space: &Space, cell: &[f64], y: &[f64], mesh: f64, out: &mut [f64]) {
    match space {
        Space::Interval | Space::Disk => {
            for k in 0..space.dim() {
                out[k] = y[k].clamp(cell[k] - mesh / 2.0, cell[k] + mesh / 2.0);
            }
        }
        Space::Circle => {
            let mut dth = (y[0] - cell[0]).rem_euclid(TWO_PI);
            if dth > std::f64::consts::PI {
                dth -= TWO_PI;
            }
            out[0] = (cell[0] + dth.clamp(-mesh / 2.0, mesh / 2.0)).rem_euclid(TWO_PI);
        }
        Space::Product { first, second } => {
            let k = first.dim();
            clamp_box(first, &cell[..k], &y[..k], mesh, &mut out[..k]);
            clamp_box(second, &cell[k..], &y[k..], mesh, &mut out[k..]);
        }
    }
}

impl ReachableSetEstimate {
    /// Reconstruct the witness chain (sequence of anchor points, oldest
    /// first) that reaches the i-th point.
    pub fn witness_chain(&self, i: usize) -> Vec<Vec<f64>> {
        let mut chain = vec![self.points[i].clone()];
        let mut cur = i;
        while let Some(p) = self.parents[cur] {
            chain.push(self.points[p].clone());
            cur = p;
        }
        chain.reverse();
        chain
    }
}

/// A singularity's neighborhood visited by a trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VisitRecord {
    pub singularity: MetricPoint,
    pub radius: f64,
    pub first_entry: f64,
    pub last_entry: f64,
}

/// Which singularities' neighborhoods the trajectory enters, with first and
/// last entry times over its finite window.
pub fn visited_singularities(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    neighborhoods: &[(MetricPoint, f64)],
) -> Result<Vec<VisitRecord>> {
    for s in flow.singularities() {
        if !neighborhoods
            .iter()
            .any(|(p, _)| flow.distance(&p.coords, &s.point.coords) < 1e-9)
        {
            return Err(Error::Precondition(format!(
                "no neighborhood declared for singularity {:?}",
                s.point.coords
            )));
        }
    }
    let (lo, hi) = xi.window();
    let pitch = ps_grid_pitch(xi.t0_step);
    let n = ((hi - lo) / pitch).round() as usize;
    let mut records: Vec<Option<VisitRecord>> = vec![None; neighborhoods.len()];
    for k in 0..=n {
        let t = (lo + k as f64 * pitch).min(hi);
        let x = xi.eval(flow, t)?;
        for (j, (p, r)) in neighborhoods.iter().enumerate() {
            if flow.distance(&x, &p.coords) < *r {
                match &mut records[j] {
                    Some(rec) => rec.last_entry = t,
                    None => {
                        records[j] = Some(VisitRecord {
                            singularity: p.clone(),
                            radius: *r,
                            first_entry: t,
                            last_entry: t,
                        })
                    }
                }
            }
        }
    }
    Ok(records.into_iter().flatten().collect())
}

/// Largest radius u (on a geometric schedule below `target`) such that all
/// probe chains of defect d started in B(u, p) stay inside B(target, p) over
/// the horizon, in the given time direction. Probes climb outward
/// (worst-case directed jumps) plus seeded uniform noise.
pub fn estimate_trapping_radius(
    flow: &FlowSpec,
    p: &MetricPoint,
    d: f64,
    target: f64,
    direction: Direction,
    horizon: f64,
    seed: u64,
) -> Option<f64> {
    let space = flow.space();
    let t0 = 0.5;
    let steps = (horizon / t0).ceil() as i64;
    let window = match direction {
        Direction::Forward => (0i64.min(-1), steps),
        Direction::Backward => (-steps, 1),
    };
    'candidates: for k in 1..=12 {
        let u = target * 0.8 * 0.75f64.powi(k - 1);
        if u < d / 2.0 {
            return None;
        }
        let probes = ball_probes(space, &p.coords, u, seed ^ (k as u64));
        for (pi, q) in probes.iter().enumerate() {
            let start = MetricPoint {
                coords: q.clone(),
                space_id: space.id(),
            };
            // outward-directed worst case plus uniform-noise chains
            let far = escape_target(space, &p.coords, q);
            let models: [crate::pseudo::JumpModel; 2] = [
                crate::pseudo::JumpModel::Directed(&far),
                crate::pseudo::JumpModel::UniformBall,
            ];
            for (mi, model) in models.iter().enumerate() {
                let xi = match crate::pseudo::generate_pt(
                    flow,
                    &start,
                    d,
                    t0,
                    window,
                    seed ^ ((k as u64) << 8) ^ ((pi as u64) << 16) ^ (mi as u64),
                    *model,
                ) {
                    Ok(xi) => xi,
                    Err(_) => continue,
                };
                let (lo, hi) = xi.window();
                let pitch = ps_grid_pitch(t0);
                let m = ((hi - lo) / pitch).round() as usize;
                for j in 0..=m {
                    let t = (lo + j as f64 * pitch).min(hi);
                    let x = xi.eval(flow, t).unwrap();
                    if flow.distance(&x, &p.coords) >= target {
                        continue 'candidates;
                    }
                }
            }
        }
        return Some(u);
    }
    None
}

/// A point of the space far from p through q's direction, used as the target
/// of worst-case outward jumps.
fn escape_target(space: &Space, p: &[f64], q: &[f64]) -> MetricPoint {
    let dim = space.dim();
    let mut v = vec![0.0; dim];
    space.chart_displacement(p, q, &mut v);
    let n = space.chart_norm(&v);
    if n < 1e-12 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|c| *c *= space.diameter() / n);
    }
    let mut far = q.to_vec();
    space.apply_chart_displacement(&mut far, &v);
    MetricPoint {
        coords: far,
        space_id: space.id(),
    }
}
