//! End-to-end pipelines: converting an oriented match of a chain into a
//! slope-constrained one by case analysis on the singularities the chain
//! visits, and the product construction that shadows a chain of φ1 × φ2 when
//! the second factor's limit set consists of singularities.
//!
//! Case dispatch for a chain ξ with visit set S(ξ):
//!   1. empty: straighten the whole window.
//!   2. one stable singularity entered at a finite first time: straighten the
//!      pre-entry side, extend with unit slope; the trapped side is bounded
//!      by the triangle through the singularity.
//!   3. one unstable singularity: case 2 under time reversal.
//!   4. trapped at both ends with an interior excursion: straighten the
//!      middle segment with pinned endpoints, unit-slope tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{build_time_reversed, FlowSpec, StabilityTag};
use crate::pseudo::StepPseudotrajectory;
use crate::reparam::{self, Reparametrization};
use crate::search::{
    self, CertMode, SearchGrid, ShadowingCertificate,
};
use crate::space::MetricPoint;
use crate::stability::{self, Direction};
use crate::straighten::{straighten, BundleParams, ConstantsBundle};

pub use crate::reparam::splice as splice_reparam;

/// Which branch of the case analysis a chain fell into.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseClassification {
    pub case_id: u8,
    /// Stable-side entry: singularity index and the split time.
    pub stable_hit: Option<(usize, f64)>,
    /// Unstable-side exit: singularity index and the split time.
    pub unstable_hit: Option<(usize, f64)>,
    /// Window(s) on which straightening applies.
    pub windows: Vec<(f64, f64)>,
}

/// Tunables of the standard-from-oriented pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineParams {
    /// Final standard budget ε0.
    pub eps0: f64,
    /// Neighborhood radius U_p per singularity (trapping-probed when absent).
    pub u_radius: Option<f64>,
    /// Largest defect the trapping neighborhoods were probed at.
    pub d0: Option<f64>,
    /// Candidate ball cover size per anchor.
    pub per_ball: usize,
    /// Retry schedule: halve d this many times on constants errors.
    pub max_retries: u32,
    /// Probe horizon for trapping estimates.
    pub horizon: f64,
    pub seed: u64,
}

impl PipelineParams {
    pub fn new(eps0: f64, seed: u64) -> PipelineParams {
        PipelineParams {
            eps0,
            u_radius: None,
            d0: None,
            per_ball: 3,
            max_retries: 4,
            horizon: 40.0,
            seed,
        }
    }
}

/// Frozen geometry for a theorem-1 run against one flow: the protected
/// region constants plus the trapping neighborhoods.
///
/// Straightening happens against two region/budget pairs: chains that never
/// meet a neighborhood are straightened over a wide region at the full ε0,
/// while the split cases straighten their singularity-adjacent segment over
/// the region outside the neighborhoods at 0.45·ε0 (the trapped tails
/// contribute at most ε0/2 through the triangle via the singularity, so the
/// total stays below ε0).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Theorem1Setup {
    pub eps0: f64,
    /// Budget used on the straightened segment of the split cases.
    pub eps_split: f64,
    /// Trapping neighborhood radius (uniform over singularities).
    pub u_radius: f64,
    /// Defect the neighborhoods are valid for (gates the split cases).
    pub d0: f64,
    /// Excluded-ball radius of the whole-window region.
    pub r_case1: f64,
    /// Excluded-ball radius of the split-case region (just inside u).
    pub r_split: f64,
    /// Bundle for whole-window straightening at ε0.
    pub consts_case1: ConstantsBundle,
    /// Bundle for split-segment straightening at 0.45·ε0.
    pub consts_split: ConstantsBundle,
}

/// Probe the trapping radius and build both bundles. The separation
/// condition 3ε0 < min pairwise singularity distance is enforced here.
pub fn prepare_theorem1(
    flow: &FlowSpec,
    params: &PipelineParams,
) -> Result<Theorem1Setup> {
    let eps0 = params.eps0;
    let sings = flow.singularities();
    for (i, a) in sings.iter().enumerate() {
        for b in sings.iter().skip(i + 1) {
            let d = flow.distance(&a.point.coords, &b.point.coords);
            if 3.0 * eps0 >= d {
                return Err(Error::Precondition(format!(
                    "3·eps0 = {} is not below the singularity separation {d}",
                    3.0 * eps0
                )));
            }
        }
        if a.stability == StabilityTag::None {
            return Err(Error::Precondition(
                "all singularities must be Lyapunov stable or unstable".to_string(),
            ));
        }
    }
    let d0 = params.d0.unwrap_or(0.004);
    let u_radius = match params.u_radius {
        Some(u) => u,
        None => {
            let mut best: Option<f64> = None;
            for s in sings {
                let dir = if s.stability.is_stable() {
                    Direction::Forward
                } else {
                    Direction::Backward
                };
                let u = stability::estimate_trapping_radius(
                    flow,
                    &s.point,
                    d0,
                    eps0 / 4.0,
                    dir,
                    params.horizon,
                    params.seed,
                )
                .ok_or_else(|| {
                    Error::Precondition(format!(
                        "no trapping neighborhood at defect {d0} for {:?}",
                        s.point.coords
                    ))
                })?;
                best = Some(best.map_or(u, |b: f64| b.min(u)));
            }
            best.ok_or_else(|| Error::Precondition("flow has no singularities".to_string()))?
        }
    };
    let eps_split = 0.45 * eps0;
    let r_split = 0.95 * u_radius;
    let r_case1 = (0.8 * eps0).min(0.3).max(r_split);
    let mut full = BundleParams::new(r_case1, eps0);
    full.mesh = 0.03;
    let consts_case1 = crate::straighten::estimate_constants(flow, &full)?;
    let mut split = BundleParams::new(r_split, eps_split);
    split.mesh = 0.03;
    let consts_split = crate::straighten::estimate_constants(flow, &split)?;

    // cover check: the split-case core and the neighborhoods fill the space,
    // so a chain outside every neighborhood stays in the protected core
    let space_samples: Vec<Vec<f64>> = flow.space().grid_cover(0.03);
    for x in &space_samples {
        let in_core = consts_split.region_ktilde.contains(flow, x);
        let in_ball = sings
            .iter()
            .any(|s| flow.distance(x, &s.point.coords) < u_radius);
        if !in_core && !in_ball {
            return Err(Error::Precondition(format!(
                "cover check fails at {x:?}: neither in the split core nor in a neighborhood"
            )));
        }
    }
    Ok(Theorem1Setup {
        eps0,
        eps_split,
        u_radius,
        d0,
        r_case1,
        r_split,
        consts_case1,
        consts_split,
    })
}

/// Classify the visit structure of a chain against the trapping
/// neighborhoods, yielding the case id and split times.
pub fn classify_case(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    setup: &Theorem1Setup,
) -> Result<CaseClassification> {
    let neighborhoods: Vec<(MetricPoint, f64)> = flow
        .singularities()
        .iter()
        .map(|s| (s.point.clone(), setup.u_radius))
        .collect();
    let visits = stability::visited_singularities(flow, xi, &neighborhoods)?;
    let (lo, hi) = xi.window();
    if visits.is_empty() {
        return Ok(CaseClassification {
            case_id: 1,
            stable_hit: None,
            unstable_hit: None,
            windows: vec![(lo, hi)],
        });
    }
    if visits.len() > 1 {
        return Err(Error::NotShadowable(format!(
            "chain visits {} singularities; the separation bound admits at most one stable and one unstable",
            visits.len()
        )));
    }
    let visit = &visits[0];
    let sing_idx = flow
        .singularities()
        .iter()
        .position(|s| flow.distance(&s.point.coords, &visit.singularity.coords) < 1e-9)
        .unwrap();
    let tag = flow.singularities()[sing_idx].stability;
    let t0_step = xi.t0_step;
    // the margin excludes the jump-assisted sliver around the entry/exit of
    // the neighborhood, whose anchors no single orbit can track at the gate
    let margin = 2.5;

    let enters_interior = visit.first_entry > lo + t0_step;
    let exits_interior = visit.last_entry < hi - t0_step;

    if tag == StabilityTag::Both {
        // trapped at both ends, interior excursion: the visit records are the
        // complement; find the maximal interior gap outside the neighborhood
        if let Some((gap_lo, gap_hi)) = interior_gap(flow, xi, &visit.singularity, setup.u_radius)? {
            let (w_lo, w_hi) = (gap_lo + margin, gap_hi - margin);
            if w_hi - w_lo >= setup.consts_split.t0 {
                return Ok(CaseClassification {
                    case_id: 4,
                    stable_hit: Some((sing_idx, gap_hi)),
                    unstable_hit: Some((sing_idx, gap_lo)),
                    windows: vec![(w_lo, w_hi)],
                });
            }
        }
    }
    if tag.is_stable() && enters_interior {
        let split = (visit.first_entry - margin).max(lo);
        if split - lo >= setup.consts_split.t0 {
            return Ok(CaseClassification {
                case_id: 2,
                stable_hit: Some((sing_idx, split)),
                unstable_hit: None,
                windows: vec![(lo, split)],
            });
        }
    }
    if tag.is_unstable() && exits_interior {
        let split = (visit.last_entry + margin).min(hi);
        if hi - split >= setup.consts_split.t0 {
            return Ok(CaseClassification {
                case_id: 3,
                stable_hit: None,
                unstable_hit: Some((sing_idx, split)),
                windows: vec![(split, hi)],
            });
        }
    }
    // the chain never leaves the neighborhood: degenerate trapped case
    Ok(CaseClassification {
        case_id: 2,
        stable_hit: Some((sing_idx, lo)),
        unstable_hit: None,
        windows: vec![],
    })
}

/// Maximal interior interval on which the chain stays outside B(u, p),
/// with trapped stretches on both sides.
fn interior_gap(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    p: &MetricPoint,
    u: f64,
) -> Result<Option<(f64, f64)>> {
    let (lo, hi) = xi.window();
    let pitch = xi.t0_step / 8.0;
    let n = ((hi - lo) / pitch).round() as usize;
    let mut inside: Vec<bool> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = (lo + k as f64 * pitch).min(hi);
        let x = xi.eval(flow, t)?;
        inside.push(flow.distance(&x, &p.coords) < u);
    }
    if !(inside[0] && inside[n]) {
        return Ok(None);
    }
    let first_out = inside.iter().position(|&b| !b);
    let last_out = inside.iter().rposition(|&b| !b);
    match (first_out, last_out) {
        (Some(a), Some(b)) if b > a => {
            // edges may chatter while jumps fight the flow across the
            // boundary; the margin trim excludes them, and the straightening
            // region membership guards the middle independently
            Ok(Some((lo + a as f64 * pitch, lo + b as f64 * pitch)))
        }
        _ => Ok(None),
    }
}

/// Outcome of the theorem-1 pipeline for one chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StandardShadowOutcome {
    pub certificate: ShadowingCertificate,
    pub case: CaseClassification,
}

/// The search gate for the oriented stage: min of a third of the trapping
/// radius, the quarter budget, and the straightening input closeness.
pub fn oriented_gate(setup: &Theorem1Setup, whole_window: bool) -> f64 {
    let consts = if whole_window {
        &setup.consts_case1
    } else {
        &setup.consts_split
    };
    (setup.u_radius / 3.0)
        .min(setup.eps0 / 4.0)
        .min(consts.eps1)
}

fn adaptive_grid(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    gate: f64,
) -> SearchGrid {
    let mut grid = SearchGrid::defaults_for(xi);
    let samples: Vec<Vec<f64>> = xi.anchors.iter().map(|a| a.coords.clone()).collect();
    let speed = flow.max_speed(&samples).max(1e-6);
    grid.ds = (gate * 0.35 / speed).min(xi.t0_step / 8.0);
    let (lo, hi) = xi.window();
    grid.orbit_window = Some((-2.0 * xi.t0_step - 1.0, (hi - lo) + 2.0 * xi.t0_step + 1.0));
    grid
}

fn oriented_match(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    gate: f64,
    per_ball: usize,
) -> Result<Option<ShadowingCertificate>> {
    let grid = adaptive_grid(flow, xi, gate);
    let candidates = search::default_candidates(flow, xi, gate, per_ball);
    search::search_oriented(flow, xi, gate, &candidates, &grid)
}

/// Convert an oriented match into a standard one by the case analysis. The
/// returned certificate is re-verified end to end at ε0 before returning.
pub fn standard_from_oriented(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    setup: &Theorem1Setup,
    per_ball: usize,
) -> Result<StandardShadowOutcome> {
    let case = classify_case(flow, xi, setup)?;
    // split cases lean on the trapping neighborhoods, which were probed at
    // defect d0; finer chains must be requested when the chain exceeds it
    if case.case_id != 1 && xi.measured_defect(flow) >= setup.d0 {
        return Err(Error::Constants(format!(
            "chain defect {} exceeds the trapping defect {}; retry with a finer chain",
            xi.measured_defect(flow),
            setup.d0
        )));
    }
    let eps0 = setup.eps0;
    let (lo, hi) = xi.window();
    let outcome = match case.case_id {
        1 => {
            let gate = oriented_gate(setup, true);
            let cert = oriented_match(flow, xi, gate, per_ball)?
                .ok_or_else(|| Error::NotShadowable(format!("no oriented match at {gate}")))?;
            let (g, y) = cert.normalized_match(flow);
            let t1 = hi - lo;
            let (gt, _) = straighten(flow, xi, lo, t1, &g, &y, eps0, &setup.consts_case1)?;
            let h = gt.shifted(lo, 0.0);
            finish_certificate(flow, xi, &y, h, eps0, &case, cert.grid_pitch)
        }
        2 => case2_certificate(flow, xi, setup, &case, per_ball),
        3 => {
            // time reversal of case 2
            let rev_flow = build_time_reversed(flow.clone());
            let rev_xi = xi.time_reversed(&rev_flow)?;
            let rev_setup = prepare_reversed_setup(setup, &rev_flow)?;
            let rev_case = classify_case(&rev_flow, &rev_xi, &rev_setup)?;
            if rev_case.case_id != 2 {
                return Err(Error::NotShadowable(format!(
                    "reversed chain classifies as case {} instead of 2",
                    rev_case.case_id
                )));
            }
            let rc = case2_certificate(&rev_flow, &rev_xi, &rev_setup, &rev_case, per_ball)?;
            // map the certificate back through t -> -t
            let h_rev = rc.h;
            let knots: Vec<(f64, f64)> = h_rev
                .knots()
                .iter()
                .rev()
                .map(|&(t, v)| (-t, -v))
                .collect();
            let tails = h_rev.tail_slopes();
            let h = reparam::make_piecewise_linear(knots, (tails.1, tails.0))?;
            let x = MetricPoint {
                coords: rc.x.coords.clone(),
                space_id: rc.x.space_id,
            };
            finish_certificate(flow, xi, &x, h, eps0, &case, rc.grid_pitch)
        }
        4 => case4_certificate(flow, xi, setup, &case, per_ball),
        _ => unreachable!(),
    }?;
    let recheck = search::verify_certificate(flow, xi, &outcome)?;
    if recheck >= eps0 {
        return Err(Error::Constants(format!(
            "assembled certificate re-verifies at {recheck} >= eps0"
        )));
    }
    Ok(StandardShadowOutcome {
        certificate: outcome,
        case,
    })
}

fn finish_certificate(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    y: &MetricPoint,
    h: Reparametrization,
    eps0: f64,
    _case: &CaseClassification,
    grid_pitch: f64,
) -> Result<ShadowingCertificate> {
    let (lo, hi) = xi.window();
    let mut cert = ShadowingCertificate {
        x: y.clone(),
        h,
        sup_error: 0.0,
        mode: CertMode::Standard { eps_rep: eps0 },
        window: (lo, hi),
        grid_pitch,
        flow_id: flow.fingerprint(),
    };
    let sup = search::verify_certificate(flow, xi, &cert)?;
    if sup >= eps0 {
        return Err(Error::Constants(format!(
            "certificate sup {sup} reaches eps0 = {eps0}"
        )));
    }
    let rep = reparam::verify_rep_eps(&cert.h, eps0, cert.window);
    if !rep.ok {
        return Err(Error::Constants(format!(
            "certificate slope {} leaves the eps0 class",
            rep.worst_slope
        )));
    }
    cert.sup_error = sup;
    Ok(cert)
}

/// Case 2: straighten the pre-entry side at ε0/4, keep unit slope afterward.
/// On the trapped side both the chain (near p) and the orbit of the matched
/// point stay within the ε0 budget by the triangle through p.
fn case2_certificate(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    setup: &Theorem1Setup,
    case: &CaseClassification,
    per_ball: usize,
) -> Result<ShadowingCertificate> {
    let (lo, hi) = xi.window();
    let (_, split) = case.stable_hit.expect("case 2 carries a stable hit");
    if case.windows.is_empty() {
        // chain trapped over the whole window: the singularity itself shadows
        let (sing_idx, _) = case.stable_hit.unwrap();
        let p = flow.singularities()[sing_idx].point.clone();
        let h = reparam::identity().shifted(lo, 0.0);
        return finish_certificate(flow, xi, &p, h, setup.eps0, case, xi.t0_step / 2.0);
    }
    // align the split to the anchor grid and restrict
    let split_n = ((split - lo) / xi.t0_step).floor() as i64 + xi.n_min;
    let split_n = split_n.clamp(xi.n_min + 2, xi.n_max);
    let pre = xi.restrict(xi.n_min, split_n)?;
    let gate = oriented_gate(setup, false);
    let cert = oriented_match(flow, &pre, gate, per_ball)?
        .ok_or_else(|| Error::NotShadowable(format!("no oriented match of the pre-entry side at {gate}")))?;
    let (g, y) = cert.normalized_match(flow);
    let (plo, phi) = pre.window();
    let t1 = phi - plo;
    let (gt, _) = straighten(flow, xi, plo, t1, &g, &y, setup.eps_split, &setup.consts_split)?;
    // trapped-side surrogate: the chain stays within the quarter ball of the
    // singularity after the split
    let (sing_idx, split_t) = case.stable_hit.expect("case 2 carries a stable hit");
    let p = &flow.singularities()[sing_idx].point;
    let pitch = xi.t0_step / 2.0;
    let steps = ((hi - (split_t + 1.0).min(hi)) / pitch).max(0.0) as usize;
    for k in 0..=steps {
        let t = ((split_t + 1.0) + k as f64 * pitch).min(hi);
        let a = xi.eval(flow, t)?;
        if flow.distance(&a, &p.coords) >= setup.eps0 / 4.0 {
            return Err(Error::Constants(format!(
                "trapped side leaves the quarter ball at t = {t}"
            )));
        }
    }
    // unit-slope extension beyond the split keeps the orbit parked near p
    let h = gt.shifted(plo, 0.0);
    let _ = hi;
    finish_certificate(flow, xi, &y, h, setup.eps0, case, cert.grid_pitch)
}

/// Case 4: straighten the interior excursion with pinned endpoints; the
/// trapped stretches on both sides ride unit-slope tails.
fn case4_certificate(
    flow: &FlowSpec,
    xi: &StepPseudotrajectory,
    setup: &Theorem1Setup,
    case: &CaseClassification,
    per_ball: usize,
) -> Result<ShadowingCertificate> {
    let (gap_lo, gap_hi) = case.windows[0];
    // restrict to the anchor range inside the trimmed excursion window
    let a = ((gap_lo - xi.n_min as f64 * xi.t0_step) / xi.t0_step).ceil() as i64 + xi.n_min;
    let b = ((gap_hi - xi.n_min as f64 * xi.t0_step) / xi.t0_step).floor() as i64 + xi.n_min;
    let a = a.clamp(xi.n_min, xi.n_max - 1);
    let b = b.clamp(a + 1, xi.n_max);
    let mid = xi.restrict(a, b)?;
    let gate = oriented_gate(setup, false);
    let cert = oriented_match(flow, &mid, gate, per_ball)?
        .ok_or_else(|| Error::NotShadowable(format!("no oriented match of the excursion at {gate}")))?;
    let (g, y) = cert.normalized_match(flow);
    let (mlo, mhi) = mid.window();
    let t1 = mhi - mlo;
    let (gt, _) = straighten(flow, xi, mlo, t1, &g, &y, setup.eps_split, &setup.consts_split)?;
    // continuity of the splice is exact: the straightened map pins both
    // endpoint values, and the tails continue with unit slope
    let h = gt.shifted(mlo, 0.0);
    finish_certificate(flow, xi, &y, h, setup.eps0, case, cert.grid_pitch)
}

fn prepare_reversed_setup(setup: &Theorem1Setup, rev_flow: &FlowSpec) -> Result<Theorem1Setup> {
    // regions and constants are time-symmetric for the built-in flows; the
    // bundles are re-estimated against the reversed flow to stay honest
    let mut full = BundleParams::new(setup.r_case1, setup.eps0);
    full.mesh = 0.03;
    let consts_case1 = crate::straighten::estimate_constants(rev_flow, &full)?;
    let mut split = BundleParams::new(setup.r_split, setup.eps_split);
    split.mesh = 0.03;
    let consts_split = crate::straighten::estimate_constants(rev_flow, &split)?;
    Ok(Theorem1Setup {
        eps0: setup.eps0,
        eps_split: setup.eps_split,
        u_radius: setup.u_radius,
        d0: setup.d0,
        r_case1: setup.r_case1,
        r_split: setup.r_split,
        consts_case1,
        consts_split,
    })
}

/// One row of a theorem-style experiment report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub case_id: u8,
    pub d: f64,
    pub oriented_ok: bool,
    pub standard_ok: bool,
    pub sup_error: f64,
    pub retries: u32,
}

/// Run the theorem-1 pipeline with the halving retry schedule: when the
/// straightening or trapping constants reject a chain, the chain is
/// regenerated at half the defect (same seed and scenario).
pub fn theorem1_trial(
    flow: &FlowSpec,
    setup: &Theorem1Setup,
    generate: &dyn Fn(f64) -> Result<StepPseudotrajectory>,
    d: f64,
    params: &PipelineParams,
) -> Result<(TrialRow, Option<StandardShadowOutcome>)> {
    let mut d_cur = d;
    let mut retries = 0u32;
    loop {
        let xi = generate(d_cur)?;
        match standard_from_oriented(flow, &xi, setup, params.per_ball) {
            Ok(out) => {
                let gate = oriented_gate(setup, true);
                let oriented_probe = oriented_match(flow, &xi, gate, params.per_ball)?;
                let row = TrialRow {
                    seed: xi.seed.unwrap_or(0),
                    case_id: out.case.case_id,
                    d,
                    oriented_ok: oriented_probe.is_some(),
                    standard_ok: true,
                    sup_error: out.certificate.sup_error,
                    retries,
                };
                return Ok((row, Some(out)));
            }
            Err(Error::Constants(_)) | Err(Error::NotShadowable(_)) | Err(Error::Precondition(_))
                if retries < params.max_retries =>
            {
                retries += 1;
                d_cur /= 2.0;
            }
            Err(e) => return Err(e),
            // unreachable: Ok handled above
        }
        if retries >= params.max_retries {
            let xi = generate(d_cur)?;
            let gate = oriented_gate(setup, true);
            let oriented_probe = oriented_match(flow, &xi, gate, params.per_ball)?;
            let row = TrialRow {
                seed: xi.seed.unwrap_or(0),
                case_id: 0,
                d,
                oriented_ok: oriented_probe.is_some(),
                standard_ok: false,
                sup_error: f64::NAN,
                retries,
            };
            return Ok((row, None));
        }
    }
}

// ----- product pipeline -----

/// Frozen geometry for a theorem-2 run on φ1 × φ2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Theorem2Setup {
    pub eps0: f64,
    /// Trapping radius of φ2's singularities (quarter-scale inner radius r2).
    pub r2: f64,
    /// φ2 neighborhood radius U_p.
    pub u2: f64,
    /// Uniform transit bound: orbits from the co-region reach the r/2 balls
    /// of the terminal singularities within S0.
    pub s0: f64,
    /// Displacement time bound: sup_x dist(x, φ(t,x)) < min(r2, eps0/4) for
    /// t in [0, tau0].
    pub tau0: f64,
    /// φ1 trapping neighborhood radius (lem.M-style) and its third r1.
    pub v1: f64,
    pub r1: f64,
    /// Inner radius for φ2's one-sided trapping at the working defect.
    pub r_inner: f64,
    /// Constants of φ1 at the case-2 straightening budget.
    pub consts1: ConstantsBundle,
    /// The case-2 budget min{r1, r2, eps1(lemM), eps0/4, tau0/(2 S0)}.
    pub eps_case2: f64,
    /// The case-1 gate for φ1's oriented match.
    pub eps_case1: f64,
    pub d2: f64,
}

pub fn prepare_theorem2(
    flow1: &FlowSpec,
    flow2: &FlowSpec,
    eps0: f64,
    seed: u64,
) -> Result<Theorem2Setup> {
    if !flow2.limit_set_is_singularities() {
        return Err(Error::Precondition(
            "the second factor's limit set must consist of its singularities".to_string(),
        ));
    }
    for (i, a) in flow2.singularities().iter().enumerate() {
        for b in flow2.singularities().iter().skip(i + 1) {
            if 3.0 * eps0 >= flow2.distance(&a.point.coords, &b.point.coords) {
                return Err(Error::Precondition(
                    "3·eps0 must stay below the singularity separation of the second factor".to_string(),
                ));
            }
        }
    }
    let d0 = 0.004;
    // u2: trapping neighborhoods of φ2 at the ε0/4 target
    let mut u2 = f64::INFINITY;
    for s in flow2.singularities() {
        let dir = if s.stability.is_stable() {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let u = stability::estimate_trapping_radius(flow2, &s.point, d0, eps0 / 4.0, dir, 40.0, seed)
            .ok_or_else(|| Error::Precondition("no φ2 trapping neighborhood".to_string()))?;
        u2 = u2.min(u);
    }
    let r2 = u2 / 4.0;
    // r_inner: chains from B(r_inner, q) stay inside B(r2, q)
    let mut r_inner = f64::INFINITY;
    for s in flow2.singularities() {
        let dir = if s.stability.is_stable() {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let u = stability::estimate_trapping_radius(flow2, &s.point, d0 / 2.0, r2, dir, 40.0, seed ^ 1)
            .ok_or_else(|| Error::Precondition("no inner φ2 trapping radius".to_string()))?;
        r_inner = r_inner.min(u);
    }
    // S0: max transit time from the co-region to the half-inner balls, plus one
    let s0 = estimate_transit_bound(flow2, r2, r_inner / 2.0)? + 1.0;
    // tau0 from the product displacement bound
    let target = r2.min(eps0 / 4.0);
    let tau0 = displacement_time_bound(flow1, flow2, target)?;

    // φ1 trapping for the pausing case
    let mut v1 = f64::INFINITY;
    for s in flow1.singularities() {
        if s.stability == StabilityTag::None {
            continue;
        }
        let dir = if s.stability.is_stable() {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let u = stability::estimate_trapping_radius(flow1, &s.point, d0, eps0 / 4.0, dir, 40.0, seed ^ 2)
            .ok_or_else(|| Error::Precondition("no φ1 trapping neighborhood".to_string()))?;
        v1 = v1.min(u);
    }
    let r1 = v1 / 3.0;
    let eps_case2 = r1
        .min(r2)
        .min(eps0 / 4.0)
        .min(v1 / 2.0)
        .min(tau0 / (2.0 * s0));
    let eps_case1 = r1.min(eps0 / 4.0).min(v1 / 2.0);

    let mut bp = BundleParams::new(r1.min(0.25), eps_case2);
    bp.mesh = 0.03;
    let consts1 = crate::straighten::estimate_constants(flow1, &bp)?;
    Ok(Theorem2Setup {
        eps0,
        r2,
        u2,
        s0,
        tau0,
        v1,
        r1,
        r_inner,
        consts1,
        eps_case2,
        eps_case1,
        d2: d0 / 2.0,
    })
}

/// Max sampled time for orbits started outside the r2-balls to reach the
/// half-inner ball of a terminal singularity, forward and backward.
fn estimate_transit_bound(flow2: &FlowSpec, r2: f64, half_inner: f64) -> Result<f64> {
    let samples: Vec<Vec<f64>> = flow2
        .space()
        .grid_cover(0.02)
        .into_iter()
        .filter(|x| {
            flow2
                .singularities()
                .iter()
                .all(|s| flow2.distance(x, &s.point.coords) >= r2)
        })
        .collect();
    let mut worst: f64 = 0.0;
    let step = 0.05;
    for x in &samples {
        for dir in [1.0, -1.0] {
            let mut cur = x.clone();
            let mut t = 0.0;
            let mut reached = false;
            while t < 200.0 {
                cur = flow2.eval_vec(dir * step, &cur);
                t += step;
                if flow2
                    .singularities()
                    .iter()
                    .any(|s| flow2.distance(&cur, &s.point.coords) < half_inner)
                {
                    reached = true;
                    break;
                }
            }
            if !reached {
                return Err(Error::Precondition(format!(
                    "orbit from {x:?} does not reach the terminal balls within 200 time units"
                )));
            }
            worst = worst.max(t);
        }
    }
    Ok(worst)
}

/// Largest tau with sup displacement below the target on the product.
fn displacement_time_bound(flow1: &FlowSpec, flow2: &FlowSpec, target: f64) -> Result<f64> {
    let s1 = flow1.space().grid_cover(0.05);
    let s2 = flow2.space().grid_cover(0.05);
    let sup = |tau: f64| -> f64 {
        let a = flow1.sup_displacement(&s1, tau);
        let b = flow2.sup_displacement(&s2, tau);
        a.max(b)
    };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    if sup(hi) < target * 0.999 {
        return Ok(hi);
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if sup(mid) < target * 0.999 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 0.0 {
        return Err(Error::Precondition("no positive displacement time bound".to_string()));
    }
    Ok(lo)
}

/// Outcome of the product pipeline, with the case id and the pieces of the
/// spliced time change.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProductShadowOutcome {
    pub certificate: ShadowingCertificate,
    pub case_id: u8,
    /// For case 1: the detected pause window [t0, t1] around time zero.
    pub pause_window: Option<(f64, f64)>,
    /// For case 2: the crossing window [t1, t2] of the second factor.
    pub crossing_window: Option<(f64, f64)>,
}

fn split_chain(
    product: &FlowSpec,
    xi: &StepPseudotrajectory,
) -> Result<(StepPseudotrajectory, StepPseudotrajectory, usize)> {
    let (flow1, flow2) = product
        .components()
        .ok_or_else(|| Error::Precondition("not a product flow".to_string()))?;
    let k = flow1.dim();
    let a1: Vec<MetricPoint> = xi
        .anchors
        .iter()
        .map(|a| MetricPoint {
            coords: a.coords[..k].to_vec(),
            space_id: flow1.space().id(),
        })
        .collect();
    let a2: Vec<MetricPoint> = xi
        .anchors
        .iter()
        .map(|a| MetricPoint {
            coords: a.coords[k..].to_vec(),
            space_id: flow2.space().id(),
        })
        .collect();
    let x1 = StepPseudotrajectory::from_anchors(flow1, xi.t0_step, xi.n_min, a1, xi.seed)?;
    let x2 = StepPseudotrajectory::from_anchors(flow2, xi.t0_step, xi.n_min, a2, xi.seed)?;
    Ok((x1, x2, k))
}

/// Shadow a product chain per the two-case analysis: either the first factor
/// pauses near one of its singularities while the second is mid-crossing
/// (identity middle piece bridged into the φ1 match), or the chain stays
/// clear of that region and the φ1 match is straightened over the crossing
/// window of the second factor.
pub fn product_shadow(
    product: &FlowSpec,
    xi: &StepPseudotrajectory,
    setup: &Theorem2Setup,
    per_ball: usize,
) -> Result<ProductShadowOutcome> {
    let (flow1, flow2) = product
        .components()
        .ok_or_else(|| Error::Precondition("not a product flow".to_string()))?;
    let (xi1, xi2, _) = split_chain(product, xi)?;
    let (lo, hi) = xi.window();
    let eps0 = setup.eps0;

    // does the chain enter B(3 r1, Sing(φ1)) × F?
    let pitch = xi.t0_step / 2.0;
    let n = ((hi - lo) / pitch).round() as usize;
    let mut s0_time: Option<f64> = None;
    for k in 0..=n {
        let t = (lo + k as f64 * pitch).min(hi);
        let p1 = xi1.eval(flow1, t)?;
        let p2 = xi2.eval(flow2, t)?;
        let near1 = flow1
            .singularities()
            .iter()
            .any(|s| flow1.distance(&p1, &s.point.coords) < 3.0 * setup.r1);
        let in_f = flow2
            .singularities()
            .iter()
            .all(|s| flow2.distance(&p2, &s.point.coords) >= setup.r2);
        if near1 && in_f {
            s0_time = Some(t);
            break;
        }
    }

    match s0_time {
        Some(s0) => product_case1(product, flow1, flow2, xi, &xi1, &xi2, setup, s0, per_ball),
        None => product_case2(product, flow1, flow2, xi, &xi1, &xi2, setup, per_ball),
    }
    .and_then(|out| {
        let recheck = search::verify_certificate(product, xi, &out.certificate)?;
        if recheck >= eps0 {
            return Err(Error::Constants(format!(
                "product certificate re-verifies at {recheck} >= eps0"
            )));
        }
        Ok(out)
    })
}

#[allow(clippy::too_many_arguments)]
fn product_case1(
    product: &FlowSpec,
    flow1: &FlowSpec,
    flow2: &FlowSpec,
    xi: &StepPseudotrajectory,
    xi1: &StepPseudotrajectory,
    xi2: &StepPseudotrajectory,
    setup: &Theorem2Setup,
    s0: f64,
    per_ball: usize,
) -> Result<ProductShadowOutcome> {
    let eps0 = setup.eps0;
    // oriented match of the first factor at the case-1 gate
    let gate = setup.eps_case1;
    let grid = adaptive_grid(flow1, xi1, gate);
    let candidates = search::default_candidates(flow1, xi1, gate, per_ball);
    let cert1 = search::search_oriented(flow1, xi1, gate, &candidates, &grid)?
        .ok_or_else(|| Error::NotShadowable(format!("first factor not matched at {gate}")))?;
    let (lo, hi) = xi.window();
    let h = &cert1.h;
    let h_inv = h.invert();
    let hs0 = h.eval(s0);
    // pause window: chain times far enough that both the chain clock and the
    // orbit clock have passed S0 on each side
    let t_lo = (s0 - setup.s0 - 1.0).min(h_inv.eval(hs0 - setup.s0) - 1.0);
    let t_hi = (s0 + setup.s0 + 1.0).max(h_inv.eval(hs0 + setup.s0) + 1.0);
    if t_lo < lo || t_hi > hi {
        return Err(Error::Precondition(format!(
            "pause window [{t_lo}, {t_hi}] leaves the chain window; the trajectory is too short"
        )));
    }
    // verify the trapped inclusion on the window
    let p1 = flow1
        .singularities()
        .iter()
        .map(|s| s.point.clone())
        .min_by(|a, b| {
            let xa = xi1.eval(flow1, s0).unwrap();
            flow1
                .distance(&xa, &a.coords)
                .partial_cmp(&flow1.distance(&xa, &b.coords))
                .unwrap()
        })
        .ok_or_else(|| Error::Precondition("first factor has no singularities".to_string()))?;
    let pitch = xi.t0_step / 2.0;
    let steps = ((t_hi - t_lo) / pitch).ceil() as usize;
    for k in 0..=steps {
        let t = (t_lo + k as f64 * pitch).min(t_hi);
        let a = xi1.eval(flow1, t)?;
        let b = flow1.eval_vec(h.eval(t), &cert1.x.coords);
        if flow1.distance(&a, &p1.coords) >= eps0 / 2.0
            || flow1.distance(&b, &p1.coords) >= eps0 / 2.0
        {
            return Err(Error::Precondition(format!(
                "pause inclusion fails at t = {t}"
            )));
        }
    }
    // five-piece bridge: h outside [t_lo, t_hi], the s0-centered unit-slope
    // piece in the middle, affine bridges in between
    let mid_lo = s0 - setup.s0;
    let mid_hi = s0 + setup.s0;
    let b_lo = h.eval(t_lo);
    let b_hi = h.eval(t_hi);
    let mid_lo_v = hs0 - setup.s0;
    let mid_hi_v = hs0 + setup.s0;
    if !(b_lo < mid_lo_v && t_lo < mid_lo && mid_hi < t_hi && mid_hi_v < b_hi) {
        return Err(Error::Precondition(
            "bridge ordering failed; pause window too tight".to_string(),
        ));
    }
    let middle = reparam::make_piecewise_linear(
        vec![(mid_lo, mid_lo_v), (mid_hi, mid_hi_v)],
        (1.0, 1.0),
    )?;
    let left_bridge =
        reparam::make_piecewise_linear(vec![(t_lo, b_lo), (mid_lo, mid_lo_v)], (1.0, 1.0))?;
    let right_bridge =
        reparam::make_piecewise_linear(vec![(mid_hi, mid_hi_v), (t_hi, b_hi)], (1.0, 1.0))?;
    let hhat = reparam::splice(&[
        ((f64::NEG_INFINITY, t_lo), h.clone()),
        ((t_lo, mid_lo), left_bridge),
        ((mid_lo, mid_hi), middle),
        ((mid_hi, t_hi), right_bridge),
        ((t_hi, f64::INFINITY), h.clone()),
    ])?;
    // shadowing point (x0, ξ2(s0)), with the certificate clock re-anchored at
    // hs0 so neither factor's base point is pulled backward through a
    // repelling singularity (which is numerically lossy)
    let hhat = hhat.shifted(0.0, -hs0);
    let base1 = flow1.eval_vec(hs0, &cert1.x.coords);
    let x2 = xi2.eval(flow2, s0)?;
    let mut coords = base1;
    coords.extend_from_slice(&x2);
    let x = MetricPoint {
        coords,
        space_id: product.space().id(),
    };
    let mut cert = ShadowingCertificate {
        x,
        h: hhat,
        sup_error: 0.0,
        mode: CertMode::Oriented,
        window: (lo, hi),
        grid_pitch: pitch,
        flow_id: product.fingerprint(),
    };
    cert.sup_error = search::verify_certificate(product, xi, &cert)?;
    if cert.sup_error >= eps0 {
        return Err(Error::Constants(format!(
            "pause-case certificate sup {} reaches eps0",
            cert.sup_error
        )));
    }
    Ok(ProductShadowOutcome {
        certificate: cert,
        case_id: 1,
        pause_window: Some((t_lo, t_hi)),
        crossing_window: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn product_case2(
    product: &FlowSpec,
    flow1: &FlowSpec,
    flow2: &FlowSpec,
    xi: &StepPseudotrajectory,
    xi1: &StepPseudotrajectory,
    xi2: &StepPseudotrajectory,
    setup: &Theorem2Setup,
    per_ball: usize,
) -> Result<ProductShadowOutcome> {
    let eps0 = setup.eps0;
    let (lo, hi) = xi.window();
    // classify the visit set of the second factor
    let neighborhoods: Vec<(MetricPoint, f64)> = flow2
        .singularities()
        .iter()
        .map(|s| (s.point.clone(), setup.u2))
        .collect();
    let visits = stability::visited_singularities(flow2, xi2, &neighborhoods)?;
    if visits.is_empty() {
        return Err(Error::Precondition(
            "second factor visits no singularity neighborhood; its window is too short".to_string(),
        ));
    }
    if visits.len() == 1 {
        // single-singularity subcase: (x1, p) shadows directly
        let gate = setup.eps_case2;
        let grid = adaptive_grid(flow1, xi1, gate);
        let candidates = search::default_candidates(flow1, xi1, gate, per_ball);
        let cert1 = search::search_oriented(flow1, xi1, gate, &candidates, &grid)?
            .ok_or_else(|| Error::NotShadowable(format!("first factor not matched at {gate}")))?;
        let p = &visits[0].singularity;
        let mut coords = cert1.x.coords.clone();
        coords.extend_from_slice(&p.coords);
        let x = MetricPoint { coords, space_id: product.space().id() };
        let mut cert = ShadowingCertificate {
            x,
            h: cert1.h.clone(),
            sup_error: 0.0,
            mode: CertMode::Oriented,
            window: (lo, hi),
            grid_pitch: cert1.grid_pitch,
            flow_id: product.fingerprint(),
        };
        cert.sup_error = search::verify_certificate(product, xi, &cert)?;
        if cert.sup_error >= eps0 {
            return Err(Error::Constants(format!(
                "single-singularity certificate sup {} reaches eps0",
                cert.sup_error
            )));
        }
        return Ok(ProductShadowOutcome {
            certificate: cert,
            case_id: 2,
            pause_window: None,
            crossing_window: None,
        });
    }
    // two singularities: find the crossing window [t1, t2] between the
    // unstable departure and the stable arrival of the second factor
    let stable = visits
        .iter()
        .find(|v| {
            flow2
                .singularities()
                .iter()
                .any(|s| s.stability.is_stable() && flow2.distance(&s.point.coords, &v.singularity.coords) < 1e-9)
        })
        .ok_or_else(|| Error::Precondition("no stable-side visit".to_string()))?;
    let unstable = visits
        .iter()
        .find(|v| {
            flow2
                .singularities()
                .iter()
                .any(|s| s.stability.is_unstable() && flow2.distance(&s.point.coords, &v.singularity.coords) < 1e-9)
        })
        .ok_or_else(|| Error::Precondition("no unstable-side visit".to_string()))?;
    let t1 = unstable.last_entry;
    let t2 = stable.first_entry;
    if !(t1 < t2) {
        return Err(Error::Precondition(format!(
            "crossing window is empty: unstable side until {t1}, stable side from {t2}"
        )));
    }
    if t2 - t1 > 2.0 * setup.s0 {
        return Err(Error::Precondition(format!(
            "crossing window {} exceeds the transit bound {}",
            t2 - t1,
            2.0 * setup.s0
        )));
    }
    // align to anchors, restrict the first factor, match and straighten
    let a = ((t1 - lo) / xi.t0_step).floor() as i64 + xi.n_min;
    let b = ((t2 - lo) / xi.t0_step).ceil() as i64 + xi.n_min;
    let a = a.clamp(xi.n_min, xi.n_max - 1);
    let b = b.clamp(a + 1, xi.n_max);
    let mid1 = xi1.restrict(a, b)?;
    let gate = setup.eps_case2.min(setup.consts1.eps1);
    // the crossing window's first factor must match to within the drift
    // budget, which only an exactly aligned path can do: the default column
    // ratio suffices and keeps the grid small
    let mut grid = SearchGrid::defaults_for(&mid1);
    let (mlo0, mhi0) = mid1.window();
    grid.orbit_window = Some((-2.0 * mid1.t0_step - 1.0, (mhi0 - mlo0) + 2.0 * mid1.t0_step + 1.0));
    let candidates = vec![mid1.anchor(a).clone()];
    let cert1 = search::search_oriented(flow1, &mid1, gate, &candidates, &grid)?
        .ok_or_else(|| {
            Error::NotShadowable(format!("first factor not matched on the crossing window at {gate}"))
        })?;
    let (g, y) = cert1.normalized_match(flow1);
    let (mlo, mhi) = mid1.window();
    let span = mhi - mlo;
    let (htilde, _) = straighten(
        flow1,
        xi1,
        mlo,
        span,
        &g,
        &y,
        setup.eps_case2,
        &setup.consts1,
    )?;
    // middle-piece slope check at tau0/(2 S0)
    let rep = reparam::verify_rep_eps(&htilde, setup.tau0 / (2.0 * setup.s0), (0.0, span));
    if !rep.ok {
        return Err(Error::Constants(format!(
            "crossing piece slope {} exceeds the drift budget",
            rep.worst_slope
        )));
    }
    // time drift of the middle piece stays below tau0
    let mut drift: f64 = 0.0;
    for k in 0..=32 {
        let t = span * k as f64 / 32.0;
        drift = drift.max((htilde.eval(t) - t).abs());
    }
    if drift > setup.tau0 + 1e-12 {
        return Err(Error::Constants(format!(
            "middle-piece time drift {drift} exceeds tau0 = {}",
            setup.tau0
        )));
    }
    // splice: h outside the crossing window, the straightened piece inside
    let h_shift = cert1.h.clone();
    let mid_piece = htilde.shifted(mlo, h_shift.eval(mlo) - htilde.eval(0.0));
    let hhat = reparam::splice(&[
        ((f64::NEG_INFINITY, mlo), h_shift.clone()),
        ((mlo, mhi), mid_piece),
        ((mhi, f64::INFINITY), h_shift.clone()),
    ])?;
    // base point (x0, ξ2(mlo)), clock re-anchored at the crossing start so
    // the second factor's base is not pulled backward through the repeller
    let h_mlo = hhat.eval(mlo);
    let hhat = hhat.shifted(0.0, -h_mlo);
    let base1 = flow1.eval_vec(h_mlo, &cert1.x.coords);
    let x2 = xi2.eval(flow2, mlo)?;
    let mut coords = base1;
    coords.extend_from_slice(&x2);
    let x = MetricPoint { coords, space_id: product.space().id() };
    let mut cert = ShadowingCertificate {
        x,
        h: hhat,
        sup_error: 0.0,
        mode: CertMode::Oriented,
        window: (lo, hi),
        grid_pitch: xi.t0_step / 2.0,
        flow_id: product.fingerprint(),
    };
    cert.sup_error = search::verify_certificate(product, xi, &cert)?;
    if cert.sup_error >= eps0 {
        return Err(Error::Constants(format!(
            "crossing certificate sup {} reaches eps0",
            cert.sup_error
        )));
    }
    Ok(ProductShadowOutcome {
        certificate: cert,
        case_id: 2,
        pause_window: None,
        crossing_window: Some((t1, t2)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_disk_flow, build_north_south_circle, build_product_flow};
    use crate::pseudo::{generate_pt, JumpModel};
    use crate::scenario;

    fn disk_setup() -> (FlowSpec, Theorem1Setup) {
        let flow = build_disk_flow();
        let params = PipelineParams::new(0.3, 9);
        let setup = prepare_theorem1(&flow, &params).unwrap();
        (flow, setup)
    }

    #[test]
    fn true_orbit_is_case1_identity() {
        let (flow, setup) = disk_setup();
        let x0 = flow.point(vec![1.0, 0.0]).unwrap();
        let xi = generate_pt(&flow, &x0, 1e-12, setup.consts_case1.t0, (0, 30), 2, JumpModel::UniformBall)
            .unwrap();
        let out = standard_from_oriented(&flow, &xi, &setup, 5).unwrap();
        assert_eq!(out.case.case_id, 1);
        assert!(out.certificate.sup_error < 1e-6);
        let rep = reparam::verify_rep_eps(&out.certificate.h, setup.eps0, out.certificate.window);
        assert!(rep.ok);
    }

    #[test]
    fn inward_spiral_is_case2() {
        let (flow, setup) = disk_setup();
        let xi = scenario::inward_spiral_chain(
            &flow,
            0.002,
            setup.consts_split.eps1 / 24.0,
            setup.u_radius,
            setup.consts_split.t0,
            (0, 50),
            5,
        )
        .unwrap();
        let out = standard_from_oriented(&flow, &xi, &setup, 5).unwrap();
        assert_eq!(out.case.case_id, 2);
        assert!(out.certificate.sup_error < setup.eps0);
        let rep = reparam::verify_rep_eps(&out.certificate.h, setup.eps0, out.certificate.window);
        assert!(rep.ok, "slope {}", rep.worst_slope);
    }

    #[test]
    fn excursion_is_case4_with_exact_splice() {
        let (flow, setup) = disk_setup();
        let xi = scenario::excursion_chain(
            &flow,
            0.002,
            setup.u_radius,
            setup.consts_split.t0,
            (-25, 25),
            7,
        )
        .unwrap();
        let out = standard_from_oriented(&flow, &xi, &setup, 5).unwrap();
        assert_eq!(out.case.case_id, 4);
        // splice continuity at the straightened window's right end is exact
        let (gap_lo, gap_hi) = out.case.windows[0];
        let h = &out.certificate.h;
        let slope_after = (h.eval(gap_hi + 0.05) - h.eval(gap_hi)) / 0.05;
        assert!((slope_after - 1.0).abs() < 1e-9, "tail slope {slope_after}");
        assert!(gap_hi - gap_lo >= setup.consts_split.t0);
    }

    #[test]
    fn product_pause_case() {
        let flow1 = build_disk_flow();
        let flow2 = build_north_south_circle();
        let product = build_product_flow(flow1.clone(), flow2.clone());
        let setup = prepare_theorem2(&flow1, &flow2, 0.3, 3).unwrap();
        let xi = scenario::product_pause_chain(
            &product,
            setup.d2.min(0.002),
            3.0 * setup.r1,
            setup.consts1.t0,
            (-80, 80),
            11,
        )
        .unwrap();
        let out = product_shadow(&product, &xi, &setup, 5).unwrap();
        assert_eq!(out.case_id, 1);
        assert!(out.certificate.sup_error < 0.3);
        let (a, b) = out.pause_window.unwrap();
        assert!(a < 0.0 && b > 0.0);
        // identity piece in the middle
        let h = &out.certificate.h;
        let mid = 0.0;
        let slope = (h.eval(mid + 0.05) - h.eval(mid)) / 0.05;
        assert!((slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_crossing_case() {
        let flow1 = build_disk_flow();
        let flow2 = build_north_south_circle();
        let product = build_product_flow(flow1.clone(), flow2.clone());
        let setup = prepare_theorem2(&flow1, &flow2, 0.3, 4).unwrap();
        let xi = scenario::product_crossing_chain(
            &product,
            setup.d2.min(0.002),
            1e-5,
            setup.consts1.t0,
            (-70, 70),
            13,
        )
        .unwrap();
        let out = product_shadow(&product, &xi, &setup, 5).unwrap();
        assert_eq!(out.case_id, 2);
        assert!(out.certificate.sup_error < 0.3);
        // projections of the shadowing orbit shadow the factors separately
        let (x1, x2, k) = split_chain(&product, &xi).unwrap();
        let h = &out.certificate.h;
        let (lo, hi) = out.certificate.window;
        let mut sup1: f64 = 0.0;
        let mut sup2: f64 = 0.0;
        let n = ((hi - lo) / 0.25).round() as usize;
        for i in 0..=n {
            let t = (lo + i as f64 * 0.25).min(hi);
            let a1 = x1.eval(&flow1, t).unwrap();
            let a2 = x2.eval(&flow2, t).unwrap();
            let o = product.eval_vec(h.eval(t), &out.certificate.x.coords);
            sup1 = sup1.max(flow1.distance(&a1, &o[..k]));
            sup2 = sup2.max(flow2.distance(&a2, &o[k..]));
        }
        assert!(sup1 < 0.3, "first factor sup {sup1}");
        assert!(sup2 < 0.3, "second factor sup {sup2}");
    }

    #[test]
    fn separation_precondition() {
        // eps0 too large for the north–south pair at distance π
        let flow = build_north_south_circle();
        let params = PipelineParams::new(1.2, 1);
        assert!(matches!(
            prepare_theorem1(&flow, &params),
            Err(Error::Precondition(_))
        ));
    }
}
