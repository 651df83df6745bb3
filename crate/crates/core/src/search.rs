//! Shadowing search by dynamic programming over a free-space grid: columns
//! are trajectory times, rows are orbit times of a candidate starting point,
//! and a cell is free when the two points are within ε. Monotone column paths
//! with bounded row advance encode reparametrized matches; the standard mode
//! additionally bounds the advance below, which pins the slopes near 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowSpec;
use crate::pseudo::StepPseudotrajectory;
use crate::reparam::{self, Reparametrization};
use crate::space::MetricPoint;

/// Column-major bit matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BitMatrix {
    pub cols: usize,
    pub rows: usize,
    words_per_col: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn new(cols: usize, rows: usize) -> BitMatrix {
        let words_per_col = rows.div_ceil(64);
        BitMatrix {
            cols,
            rows,
            words_per_col,
            data: vec![0; cols * words_per_col],
        }
    }
    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        let w = self.data[col * self.words_per_col + row / 64];
        (w >> (row % 64)) & 1 == 1
    }
    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        let w = &mut self.data[col * self.words_per_col + row / 64];
        if v {
            *w |= 1 << (row % 64);
        } else {
            *w &= !(1 << (row % 64));
        }
    }
}

/// Free-space grid for one candidate start.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeSpaceGrid {
    pub xi_times: Vec<f64>,
    pub orbit_times: Vec<f64>,
    pub free: BitMatrix,
    pub x: MetricPoint,
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    Oriented,
    Standard { eps_rep: f64 },
}

/// A shadowing match: point, time change, achieved grid sup-distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShadowingCertificate {
    pub x: MetricPoint,
    pub h: Reparametrization,
    pub sup_error: f64,
    pub mode: CertMode,
    pub window: (f64, f64),
    /// Pitch of the verification grid on which sup_error is computed.
    pub grid_pitch: f64,
    pub flow_id: u64,
}

/// Grid geometry of a search.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SearchGrid {
    /// Trajectory-time pitch (≤ T0 of the trajectory).
    pub dt: f64,
    /// Orbit-time pitch; forced to an integer fraction of dt.
    pub ds: f64,
    /// Upper bound on path slopes in oriented mode.
    pub slope_cap: f64,
    /// Orbit-time window; must contain 0. None: ±slope_cap·(window length).
    pub orbit_window: Option<(f64, f64)>,
}

impl SearchGrid {
    pub fn defaults_for(xi: &StepPseudotrajectory) -> SearchGrid {
        SearchGrid {
            dt: xi.t0_step / 2.0,
            ds: xi.t0_step / 8.0,
            slope_cap: 16.0,
            orbit_window: None,
        }
    }

    fn resolve(&self, xi: &StepPseudotrajectory) -> Result<ResolvedGrid> {
        if self.dt <= 0.0 || self.ds <= 0.0 {
            return Err(Error::param("grid pitches must be positive"));
        }
        if self.dt > xi.t0_step * (1.0 + 1e-9) {
            return Err(Error::param(format!(
                "dt = {} exceeds the trajectory anchor step {}",
                self.dt, xi.t0_step
            )));
        }
        if self.slope_cap < 1.0 {
            return Err(Error::param("slope cap must be at least 1"));
        }
        let m = (self.dt / self.ds).round().max(1.0);
        let ds = self.dt / m;
        let (lo, hi) = xi.window();
        let width = hi - lo;
        let (s_lo, s_hi) = self.orbit_window.unwrap_or((
            -self.slope_cap * width,
            self.slope_cap * width,
        ));
        if s_lo > 0.0 || s_hi < width {
            return Err(Error::param(format!(
                "orbit window [{s_lo}, {s_hi}] must contain [0, window length]"
            )));
        }
        let cols = (width / self.dt).floor() as usize + 1;
        let j0 = (-s_lo / ds).ceil() as usize;
        let rows = j0 + (s_hi / ds).floor() as usize + 1;
        if rows.saturating_mul(cols) > 2_000_000_000 {
            return Err(Error::Grid(format!(
                "free-space grid of {cols}x{rows} cells is too fine; widen ds or shrink the orbit window"
            )));
        }
        Ok(ResolvedGrid {
            dt: self.dt,
            ds,
            m: m as usize,
            slope_cap: self.slope_cap,
            t_lo: lo,
            cols,
            rows,
            j0,
        })
    }
}

struct ResolvedGrid {
    dt: f64,
    ds: f64,
    /// dt / ds.
    m: usize,
    slope_cap: f64,
    t_lo: f64,
    cols: usize,
    rows: usize,
    /// Row index of orbit time 0.
    j0: usize,
}

impl ResolvedGrid {
    fn s_of(&self, j: usize) -> f64 {
        (j as i64 - self.j0 as i64) as f64 * self.ds
    }
    fn t_of(&self, i: usize) -> f64 {
        self.t_lo + i as f64 * self.dt
    }
}

/// Orbit samples of one candidate on the row grid, anchored at orbit time 0.
fn fill_orbit(flow: &FlowSpec, x: &[f64], g: &ResolvedGrid) -> Vec<f64> {
    flow.orbit_row_samples(x, g.j0, g.ds, g.rows)
}

/// Full free-space matrix for a candidate (diagnostics/export; the search
/// itself fills rows lazily).
pub fn build_free_space(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    x: &MetricPoint,
    eps: f64,
    grid: &SearchGrid,
) -> Result<FreeSpaceGrid> {
    let g = grid.resolve(xi)?;
    let dim = flow.dim();
    let orbit = fill_orbit(flow, &x.coords, &g);
    let mut free = BitMatrix::new(g.cols, g.rows);
    for i in 0..g.cols {
        let xi_pt = xi.eval(flow, g.t_of(i))?;
        for j in 0..g.rows {
            let d = flow.distance(&xi_pt, &orbit[j * dim..(j + 1) * dim]);
            if d < eps {
                free.set(i, j, true);
            }
        }
    }
    Ok(FreeSpaceGrid {
        xi_times: (0..g.cols).map(|i| g.t_of(i)).collect(),
        orbit_times: (0..g.rows).map(|j| g.s_of(j)).collect(),
        free,
        x: x.clone(),
        eps,
    })
}

/// Exhaustive path enumeration for small grids; the verification oracle for
/// the DP. Advance range is per-column row advance [lo, hi].
pub fn brute_oracle(grid: &FreeSpaceGrid, advance_range: (usize, usize)) -> Result<bool> {
    let (cols, rows) = (grid.free.cols, grid.free.rows);
    if cols > 12 || rows > 12 {
        return Err(Error::Size(format!(
            "oracle only enumerates grids up to 12x12, got {cols}x{rows}"
        )));
    }
    let (alo, ahi) = advance_range;
    fn rec(free: &BitMatrix, i: usize, j: usize, alo: usize, ahi: usize) -> bool {
        if i + 1 == free.cols {
            return true;
        }
        for a in alo..=ahi {
            let nj = j + a;
            if nj >= free.rows {
                break;
            }
            if free.get(i + 1, nj) && rec(free, i + 1, nj, alo, ahi) {
                return true;
            }
        }
        false
    }
    for j in 0..rows {
        if grid.free.get(0, j) && rec(&grid.free, 0, j, alo, ahi) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// DP feasibility on an explicit bit matrix; returns one monotone path
/// (row per column) with per-column advance in [min_adv, max_adv], or None.
/// Reconstruction is slope-1 biased: each predecessor is the reachable row
/// closest to the nominal advance, ties toward the smaller row.
pub fn dp_path(free: &BitMatrix, min_adv: usize, max_adv: usize, nominal: usize) -> Option<Vec<usize>> {
    let (cols, rows) = (free.cols, free.rows);
    let mut reach = BitMatrix::new(cols, rows);
    // nearest reached row at or before j, per column; -1 when none
    let mut nrb_prev: Vec<i64> = vec![-1; rows];
    let mut any = false;
    for j in 0..rows {
        let r = free.get(0, j);
        if r {
            reach.set(0, j, true);
            any = true;
        }
        nrb_prev[j] = if r { j as i64 } else { nrb_prev.get(j.wrapping_sub(1)).copied().unwrap_or(-1) };
        if j > 0 && !r {
            nrb_prev[j] = nrb_prev[j - 1];
        }
    }
    if !any {
        return None;
    }
    let mut nrb_cur: Vec<i64> = vec![-1; rows];
    for i in 1..cols {
        let mut any = false;
        for j in 0..rows {
            let mut ok = false;
            if free.get(i, j) && j >= min_adv {
                let upper = j - min_adv;
                let lower = j.saturating_sub(max_adv) as i64;
                let nearest = nrb_prev[upper];
                ok = nearest >= lower;
            }
            if ok {
                reach.set(i, j, true);
                any = true;
            }
            nrb_cur[j] = if ok {
                j as i64
            } else if j > 0 {
                nrb_cur[j - 1]
            } else {
                -1
            };
        }
        if !any {
            return None;
        }
        std::mem::swap(&mut nrb_prev, &mut nrb_cur);
    }
    // pick the end row closest to the slope-1 target from the smallest start
    let target_end = (0..rows).find(|&j| reach.get(0, j)).unwrap_or(0) + nominal * (cols - 1);
    let mut end: Option<usize> = None;
    for j in 0..rows {
        if reach.get(cols - 1, j) {
            let better = match end {
                None => true,
                Some(e) => {
                    j.abs_diff(target_end) < e.abs_diff(target_end)
                }
            };
            if better {
                end = Some(j);
            }
        }
    }
    let mut path = vec![0usize; cols];
    path[cols - 1] = end?;
    for i in (0..cols - 1).rev() {
        let j = path[i + 1];
        let lo = j.saturating_sub(max_adv);
        let hi = j - min_adv;
        let want = j.saturating_sub(nominal);
        let mut best: Option<usize> = None;
        for k in lo..=hi {
            if reach.get(i, k) {
                let better = match best {
                    None => true,
                    Some(b) => k.abs_diff(want) < b.abs_diff(want),
                };
                if better {
                    best = Some(k);
                }
            }
        }
        path[i] = best.expect("reachable cell must have a reachable predecessor");
    }
    Some(path)
}

/// Banded DP against a lazily computed free space for one candidate.
/// Returns the path if a full match exists.
fn dp_search_candidate(
    flow: &FlowSpec,
    xi_cols: &[Vec<f64>],
    orbit: &[f64],
    g: &ResolvedGrid,
    eps: f64,
    min_adv: usize,
    max_adv: usize,
) -> Option<Vec<usize>> {
    let dim = flow.dim();
    let (cols, rows) = (g.cols, g.rows);
    let mut reach = BitMatrix::new(cols, rows);
    let mut nrb_prev: Vec<i64> = vec![-1; rows];
    let mut band_lo = 0usize;
    let mut band_hi = rows - 1;
    let mut prev_min = rows;
    let mut prev_max = 0usize;
    for j in 0..rows {
        let free = flow.distance(&xi_cols[0], &orbit[j * dim..(j + 1) * dim]) < eps;
        if free {
            reach.set(0, j, true);
            prev_min = prev_min.min(j);
            prev_max = prev_max.max(j);
        }
        nrb_prev[j] = if free {
            j as i64
        } else if j > 0 {
            nrb_prev[j - 1]
        } else {
            -1
        };
    }
    if prev_min > prev_max {
        return None;
    }
    let mut nrb_cur: Vec<i64> = vec![-1; rows];
    for i in 1..cols {
        let lo = (prev_min + min_adv).min(rows - 1);
        let hi = (prev_max + max_adv).min(rows - 1);
        let mut cur_min = rows;
        let mut cur_max = 0usize;
        // rows below the band keep the previous nearest-reach value semantics
        let fill_start = lo;
        for j in fill_start..=hi {
            let mut ok = false;
            if j >= min_adv {
                let upper = j - min_adv;
                let lower = j.saturating_sub(max_adv) as i64;
                if nrb_prev[upper.min(rows - 1)] >= lower {
                    let free =
                        flow.distance(&xi_cols[i], &orbit[j * dim..(j + 1) * dim]) < eps;
                    ok = free;
                }
            }
            if ok {
                reach.set(i, j, true);
                cur_min = cur_min.min(j);
                cur_max = cur_max.max(j);
            }
        }
        if cur_min > cur_max {
            return None;
        }
        // rebuild nearest-reach for the current column over the whole range
        // that the next band can query (prefix semantics)
        let next_hi = (cur_max + max_adv).min(rows - 1);
        let mut run: i64 = -1;
        for j in 0..=next_hi {
            if j >= fill_start && j <= hi && reach.get(i, j) {
                run = j as i64;
            }
            nrb_cur[j] = run;
        }
        for j in (next_hi + 1)..rows {
            nrb_cur[j] = run;
        }
        std::mem::swap(&mut nrb_prev, &mut nrb_cur);
        prev_min = cur_min;
        prev_max = cur_max;
        band_lo = band_lo.min(cur_min);
        band_hi = band_hi.max(cur_max);
    }
    // end row: closest to the slope-1 continuation of a start at orbit time 0
    let nominal = g.m;
    let target_end = g.j0 + nominal * (cols - 1);
    let mut end: Option<usize> = None;
    for j in prev_min..=prev_max {
        if reach.get(cols - 1, j) {
            let better = match end {
                None => true,
                Some(e) => j.abs_diff(target_end) < e.abs_diff(target_end),
            };
            if better {
                end = Some(j);
            }
        }
    }
    let mut path = vec![0usize; cols];
    path[cols - 1] = end?;
    for i in (0..cols - 1).rev() {
        let j = path[i + 1];
        let lo = j.saturating_sub(max_adv);
        let hi = j - min_adv;
        let want = j.saturating_sub(nominal);
        let mut best: Option<usize> = None;
        for k in lo..=hi {
            if reach.get(i, k) {
                let better = match best {
                    None => true,
                    Some(b) => k.abs_diff(want) < b.abs_diff(want),
                };
                if better {
                    best = Some(k);
                }
            }
        }
        path[i] = best.expect("reachable cell must have a reachable predecessor");
    }
    Some(path)
}

/// Knot list from a path: certified rows where the path advances, and ramps
/// of total height ds/2 across zero-advance runs to keep strict monotonicity.
fn path_to_knots(path: &[usize], g: &ResolvedGrid) -> Vec<(f64, f64)> {
    let n = path.len();
    let mut knots = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        // find the flat run [i, r]
        let mut r = i;
        while r + 1 < n && path[r + 1] == path[r] {
            r += 1;
        }
        if r == i {
            knots.push((g.t_of(i), g.s_of(path[i])));
        } else {
            let m = (r - i) as f64;
            for (k, col) in (i..=r).enumerate() {
                let ramp = 0.5 * g.ds * (k as f64 / m);
                knots.push((g.t_of(col), g.s_of(path[col]) + ramp));
            }
        }
        i = r + 1;
    }
    knots
}

fn certificate_for_path(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    x: &MetricPoint,
    path: &[usize],
    g: &ResolvedGrid,
    eps: f64,
    mode: CertMode,
) -> Result<Option<ShadowingCertificate>> {
    let knots = path_to_knots(path, g);
    let h = reparam::make_piecewise_linear(knots, (1.0, 1.0))?;
    let (lo, hi) = xi.window();
    // recompute the sup on the verification grid (the column grid)
    let mut sup: f64 = 0.0;
    for i in 0..g.cols {
        let t = g.t_of(i);
        let xi_pt = xi.eval(flow, t)?;
        let orbit_pt = flow.eval_vec(h.eval(t), &x.coords);
        sup = sup.max(flow.distance(&xi_pt, &orbit_pt));
    }
    if sup >= eps {
        return Ok(None);
    }
    Ok(Some(ShadowingCertificate {
        x: x.clone(),
        h: h.simplified(),
        sup_error: sup,
        mode,
        window: (lo, hi),
        grid_pitch: g.dt,
        flow_id: flow.fingerprint(),
    }))
}

fn run_search(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    eps: f64,
    candidates: &[MetricPoint],
    grid: &SearchGrid,
    min_adv: usize,
    max_adv: usize,
    mode: CertMode,
) -> Result<Option<ShadowingCertificate>> {
    if candidates.is_empty() {
        return Err(Error::param("empty candidate set"));
    }
    let g = grid.resolve(xi)?;
    let mut xi_cols = Vec::with_capacity(g.cols);
    for i in 0..g.cols {
        xi_cols.push(xi.eval(flow, g.t_of(i))?);
    }
    let results: Vec<(usize, Option<ShadowingCertificate>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(ci, x)| {
            let g = grid.resolve(xi).expect("already validated");
            let orbit = fill_orbit(flow, &x.coords, &g);
            let path = dp_search_candidate(flow, &xi_cols, &orbit, &g, eps, min_adv, max_adv);
            let cert = path.and_then(|p| {
                certificate_for_path(flow, xi, x, &p, &g, eps, mode).ok().flatten()
            });
            (ci, cert)
        })
        .collect();
    // deterministic selection: smallest sup_error, then candidate index
    let mut best: Option<(f64, usize, ShadowingCertificate)> = None;
    for (ci, cert) in results.into_iter() {
        if let Some(c) = cert {
            let key = (c.sup_error, ci);
            let better = match &best {
                None => true,
                Some((s, i, _)) => key < (*s, *i),
            };
            if better {
                best = Some((c.sup_error, ci, c));
            }
        }
    }
    Ok(best.map(|(_, _, c)| c))
}

/// Oriented search: advance per column in [0, slope_cap·dt/ds]; pauses are
/// allowed and later perturbed to keep h strictly increasing.
pub fn search_oriented(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    eps: f64,
    candidates: &[MetricPoint],
    grid: &SearchGrid,
) -> Result<Option<ShadowingCertificate>> {
    let g = grid.resolve(xi)?;
    let max_adv = ((g.slope_cap * g.dt / g.ds).floor() as usize).max(1);
    run_search(flow, xi, eps, candidates, grid, 0, max_adv, CertMode::Oriented)
}

/// Slope-constrained search: advance per column within
/// [(1-eps_rep)·dt/ds, (1+eps_rep)·dt/ds] rounded inward, so segment slopes
/// lie within eps_rep of 1 up to the grid's rounding slack ds/dt.
pub fn search_standard(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    eps: f64,
    eps_rep: f64,
    candidates: &[MetricPoint],
    grid: &SearchGrid,
) -> Result<Option<ShadowingCertificate>> {
    if !(0.0 < eps_rep && eps_rep < 1.0) {
        return Err(Error::param(format!("eps_rep must lie in (0,1), got {eps_rep}")));
    }
    // emptiness is judged against the requested ratio, before ds snapping
    let ratio_req = grid.dt / grid.ds;
    if ((1.0 - eps_rep) * ratio_req).ceil() > ((1.0 + eps_rep) * ratio_req).floor() {
        return Err(Error::Grid(format!(
            "advance interval empty at eps_rep = {eps_rep}: refine ds (dt/ds = {ratio_req})"
        )));
    }
    let g = grid.resolve(xi)?;
    let ratio = g.dt / g.ds;
    let min_adv = ((1.0 - eps_rep) * ratio).ceil() as usize;
    let max_adv = ((1.0 + eps_rep) * ratio).floor() as usize;
    let eps_rep_slack = eps_rep + g.ds / g.dt;
    run_search(
        flow,
        xi,
        eps,
        candidates,
        grid,
        min_adv,
        max_adv,
        CertMode::Standard { eps_rep: eps_rep_slack },
    )
}

/// Default candidate set: the first two anchors plus a deterministic cover of
/// their ε-balls (per_ball points each). A shadowing point must begin ε-close
/// to the start of the trajectory up to reparametrized time shift, so
/// covering the early window suffices.
pub fn default_candidates(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    eps: f64,
    per_ball: usize,
) -> Vec<MetricPoint> {
    let space = flow.space();
    let dim = space.dim();
    let mut out = Vec::new();
    for n in [xi.n_min, xi.n_min + 1] {
        if n > xi.n_max {
            break;
        }
        let a = xi.anchor(n);
        out.push(a.clone());
        for k in 0..per_ball {
            let mut v = vec![0.0; dim];
            let angle = std::f64::consts::TAU * k as f64 / per_ball.max(1) as f64;
            if dim == 1 {
                v[0] = if k % 2 == 0 { 1.0 } else { -1.0 } * (0.3 + 0.5 * (k / 2) as f64 / per_ball as f64);
            } else {
                v[0] = angle.cos();
                v[1] = angle.sin();
            }
            let norm = space.chart_norm(&v);
            if norm < 1e-12 {
                continue;
            }
            let scale = eps * 0.5 * (0.4 + 0.6 * (k as f64 + 1.0) / per_ball as f64) / norm;
            v.iter_mut().for_each(|c| *c *= scale);
            let mut q = a.coords.clone();
            space.apply_chart_displacement(&mut q, &v);
            out.push(MetricPoint {
                coords: q,
                space_id: a.space_id,
            });
        }
    }
    out
}

impl ShadowingCertificate {
    /// Normalize the match to the (g, y) form with g(0) = 0: shift time so
    /// the window starts at 0 and advance the base point by h(t_lo).
    pub fn normalized_match(&self, flow: &FlowSpec) -> (Reparametrization, MetricPoint) {
        let (lo, _) = self.window;
        let g0 = self.h.eval(lo);
        let g = self.h.shifted(-lo, -g0);
        let y = MetricPoint {
            coords: flow.eval_vec(g0, &self.x.coords),
            space_id: self.x.space_id,
        };
        (g, y)
    }
}

/// Recompute a certificate's grid sup from scratch.
pub fn verify_certificate(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    cert: &ShadowingCertificate,
) -> Result<f64> {
    let (lo, hi) = cert.window;
    let n = ((hi - lo) / cert.grid_pitch).round() as usize;
    let mut sup: f64 = 0.0;
    for i in 0..=n {
        let t = (lo + i as f64 * cert.grid_pitch).min(hi);
        let xi_pt = xi.eval(flow, t)?;
        let orbit_pt = flow.eval_vec(cert.h.eval(t), &cert.x.coords);
        sup = sup.max(flow.distance(&xi_pt, &orbit_pt));
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_disk_flow, build_north_south_circle};
    use crate::pseudo::{generate_pt, JumpModel};
    use rand::Rng;
    use rand::SeedableRng;

    fn chain_on_circle(seed: u64) -> (FlowSpec, StepPseudotrajectory) {
        let flow = build_disk_flow();
        let x0 = flow.point(vec![1.0, 0.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 1e-12, 0.5, (0, 20), seed, JumpModel::UniformBall).unwrap();
        (flow, xi)
    }

    #[test]
    fn true_orbit_is_matched_with_identity() {
        let (flow, xi) = chain_on_circle(1);
        let grid = SearchGrid::defaults_for(&xi);
        let candidates = vec![xi.anchor(0).clone()];
        let cert = search_oriented(&flow, &xi, 0.05, &candidates, &grid)
            .unwrap()
            .expect("true orbit must be shadowed");
        assert!(cert.sup_error < 1e-9, "sup {}", cert.sup_error);
        // h is the identity on the window
        for k in 0..=10 {
            let t = k as f64;
            assert!((cert.h.eval(t) - t).abs() < 1e-9);
        }
        let re = verify_certificate(&flow, &xi, &cert).unwrap();
        assert!((re - cert.sup_error).abs() < 1e-9);
    }

    #[test]
    fn standard_mode_matches_true_orbit() {
        let (flow, xi) = chain_on_circle(2);
        let grid = SearchGrid::defaults_for(&xi);
        let candidates = vec![xi.anchor(0).clone()];
        let cert = search_standard(&flow, &xi, 0.05, 0.3, &candidates, &grid)
            .unwrap()
            .expect("standard match");
        match cert.mode {
            CertMode::Standard { eps_rep } => {
                let rep = reparam::verify_rep_eps(&cert.h, eps_rep, cert.window);
                assert!(rep.ok, "worst slope {}", rep.worst_slope);
            }
            _ => panic!("expected standard mode"),
        }
    }

    #[test]
    fn eps_zero_matrix_is_empty_and_blocked() {
        let (flow, xi) = chain_on_circle(3);
        let mut grid = SearchGrid::defaults_for(&xi);
        grid.orbit_window = Some((-2.0, 12.0));
        let x = xi.anchor(0).clone();
        let fs = build_free_space(&flow, &xi, &x, 0.0, &grid).unwrap();
        for i in 0..fs.free.cols {
            for j in 0..fs.free.rows {
                assert!(!fs.free.get(i, j));
            }
        }
        // and a candidate far inside the disk sees no free cell at small eps
        let far = flow.point(vec![0.5, 0.0]).unwrap();
        let fs = build_free_space(&flow, &xi, &far, 0.4, &grid).unwrap();
        for i in 0..fs.free.cols {
            for j in 0..fs.free.rows {
                assert!(!fs.free.get(i, j), "radial gap 0.5 cannot be free at eps 0.4");
            }
        }
    }

    #[test]
    fn diagonal_free_for_true_orbit() {
        let (flow, xi) = chain_on_circle(4);
        let mut grid = SearchGrid::defaults_for(&xi);
        grid.orbit_window = Some((-1.0, 11.0));
        let x = xi.anchor(0).clone();
        let fs = build_free_space(&flow, &xi, &x, 0.05, &grid).unwrap();
        let j0 = fs.orbit_times.iter().position(|&s| s.abs() < 1e-12).unwrap();
        let m = (grid.dt / (fs.orbit_times[1] - fs.orbit_times[0])).round() as usize;
        for i in 0..fs.free.cols {
            assert!(fs.free.get(i, j0 + i * m), "diagonal cell ({i}) not free");
        }
    }

    #[test]
    fn empty_candidate_set_is_param_error() {
        let (flow, xi) = chain_on_circle(5);
        let grid = SearchGrid::defaults_for(&xi);
        assert!(matches!(
            search_oriented(&flow, &xi, 0.1, &[], &grid),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn coarse_grid_standard_mode_is_grid_error() {
        let (flow, xi) = chain_on_circle(6);
        let mut grid = SearchGrid::defaults_for(&xi);
        grid.ds = grid.dt / 2.5; // no integer advance in [2.25, 2.75]
        let candidates = vec![xi.anchor(0).clone()];
        let r = search_standard(&flow, &xi, 0.1, 0.1, &candidates, &grid);
        assert!(matches!(r, Err(Error::Grid(_))));
    }

    fn random_grid(rng: &mut rand_chacha::ChaCha8Rng, cols: usize, rows: usize, fill: f64) -> FreeSpaceGrid {
        let mut free = BitMatrix::new(cols, rows);
        for i in 0..cols {
            for j in 0..rows {
                if rng.gen::<f64>() < fill {
                    free.set(i, j, true);
                }
            }
        }
        FreeSpaceGrid {
            xi_times: (0..cols).map(|i| i as f64).collect(),
            orbit_times: (0..rows).map(|j| j as f64).collect(),
            free,
            x: MetricPoint { coords: vec![0.0], space_id: crate::space::Space::Interval.id() },
            eps: 0.5,
        }
    }

    #[test]
    fn dp_agrees_with_oracle_on_random_grids() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for case in 0..200 {
            let cols = 2 + (case % 7);
            let rows = 2 + (case % 11);
            let fill = 0.2 + 0.6 * (case as f64 / 200.0);
            let grid = random_grid(&mut rng, cols, rows, fill);
            // oriented-style range [0, 3] and slope-constrained [1, 2]
            for range in [(0usize, 3usize), (1, 2)] {
                let oracle = brute_oracle(&grid, range).unwrap();
                let dp = dp_path(&grid.free, range.0, range.1, 1).is_some();
                assert_eq!(dp, oracle, "case {case} range {range:?}");
            }
        }
    }

    #[test]
    fn oracle_rejects_blocked_column() {
        let mut free = BitMatrix::new(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                free.set(i, j, true);
            }
        }
        for j in 0..3 {
            free.set(1, j, false);
        }
        let grid = FreeSpaceGrid {
            xi_times: vec![0.0, 1.0, 2.0],
            orbit_times: vec![0.0, 1.0, 2.0],
            free,
            x: MetricPoint { coords: vec![0.0], space_id: crate::space::Space::Interval.id() },
            eps: 0.5,
        };
        assert!(!brute_oracle(&grid, (0, 2)).unwrap());
        assert!(dp_path(&grid.free, 0, 2, 1).is_none());
    }

    #[test]
    fn all_free_grid_accepts() {
        let mut free = BitMatrix::new(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                free.set(i, j, true);
            }
        }
        let grid = FreeSpaceGrid {
            xi_times: vec![0.0, 1.0, 2.0],
            orbit_times: vec![0.0, 1.0, 2.0],
            free: free.clone(),
            x: MetricPoint { coords: vec![0.0], space_id: crate::space::Space::Interval.id() },
            eps: 0.5,
        };
        assert!(brute_oracle(&grid, (0, 2)).unwrap());
        assert!(dp_path(&free, 0, 2, 1).is_some());
    }

    #[test]
    fn monotone_in_eps_and_standard_implies_oriented() {
        let flow = build_north_south_circle();
        let x0 = flow.point(vec![2.4]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for case in 0..12 {
            let d = 0.002 + 0.004 * rng.gen::<f64>();
            let xi = generate_pt(&flow, &x0, d, 0.5, (0, 16), 100 + case, JumpModel::UniformBall)
                .unwrap();
            let grid = SearchGrid::defaults_for(&xi);
            let candidates = default_candidates(&flow, &xi, 0.1, 5);
            let at = |eps: f64| search_oriented(&flow, &xi, eps, &candidates, &grid).unwrap();
            let lo = at(0.05);
            let hi = at(0.15);
            if lo.is_some() {
                assert!(hi.is_some(), "success at 0.05 but not 0.15 (case {case})");
            }
            let std = search_standard(&flow, &xi, 0.1, 0.3, &candidates, &grid).unwrap();
            if std.is_some() {
                assert!(
                    at(0.1).is_some(),
                    "standard success must imply oriented success (case {case})"
                );
            }
        }
    }

    #[test]
    fn certificates_reverify() {
        let flow = build_north_south_circle();
        let x0 = flow.point(vec![2.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 0.005, 0.5, (0, 16), 77, JumpModel::UniformBall).unwrap();
        let grid = SearchGrid::defaults_for(&xi);
        let candidates = default_candidates(&flow, &xi, 0.1, 5);
        let cert = search_oriented(&flow, &xi, 0.1, &candidates, &grid)
            .unwrap()
            .expect("small-defect chain on the circle is shadowable");
        assert!(cert.sup_error < 0.1);
        let re = verify_certificate(&flow, &xi, &cert).unwrap();
        assert!((re - cert.sup_error).abs() < 1e-9);
    }
}
