//! Seeded chain generators for the experiment pipelines: orbit-following
//! chains with controlled per-direction noise, basin-crossing chains, chains
//! that enter or leave a small neighborhood of a singularity, and the
//! deterministic negative control crossing a repelling circle.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::FlowSpec;
use crate::pseudo::StepPseudotrajectory;
use crate::space::MetricPoint;

/// Orbit-following chain whose jumps have per-chart-coordinate amplitudes
/// `amps` (uniform, independent), total chart norm capped strictly below d.
/// On the disk the chart coordinates are (radial, tangential), so a chain
/// with zero radial amplitude carries pure phase noise.
pub fn noisy_orbit_chain(
    flow: &FlowSpec,
    x0: &MetricPoint,
    d: f64,
    amps: &[f64],
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let space = flow.space();
    let dim = space.dim();
    if amps.len() != dim {
        return Err(Error::param(format!(
            "need {dim} amplitudes, got {}",
            amps.len()
        )));
    }
    if amps.iter().any(|&a| a < 0.0) || space.chart_norm(amps) >= d {
        return Err(Error::param(
            "amplitude vector must be nonnegative with chart norm below d".to_string(),
        ));
    }
    let (n_min, n_max) = window;
    if n_min > 0 || n_max < 0 || n_min == n_max {
        return Err(Error::param("window must contain 0 and be nonempty".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = (n_max - n_min + 1) as usize;
    let mut anchors = vec![x0.clone(); total];
    let idx = |n: i64| (n - n_min) as usize;

    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        amps.iter()
            .map(|&a| a * (rng.gen::<f64>() * 2.0 - 1.0))
            .collect()
    };

    let mut cur = x0.coords.clone();
    for n in 1..=n_max {
        let mut next = flow.eval_vec(t0, &cur);
        let jump = draw(&mut rng);
        space.displace_capped(&mut next, &jump, d * 0.9995);
        anchors[idx(n)] = MetricPoint { coords: next.clone(), space_id: x0.space_id };
        cur = next;
    }
    let mut cur = x0.coords.clone();
    for n in (n_min..0).rev() {
        let back = flow.eval_vec(-t0, &cur);
        let mut jump = draw(&mut rng);
        let prev = loop {
            let mut cand = back.clone();
            space.displace_capped(&mut cand, &jump, d * 0.9995);
            let fwd = flow.eval_vec(t0, &cand);
            if flow.distance(&fwd, &cur) < d * 0.999 {
                break cand;
            }
            jump.iter_mut().for_each(|c| *c *= 0.5);
            if space.chart_norm(&jump) < 1e-300 {
                break back.clone();
            }
        };
        anchors[idx(n)] = MetricPoint { coords: prev.clone(), space_id: x0.space_id };
        cur = prev;
    }
    let mut xi =
        StepPseudotrajectory::from_anchors(flow, t0, n_min, anchors, Some(seed))?;
    if xi.measured_defect(flow) >= d {
        return Err(Error::param(format!(
            "amplitudes produce a defect of {} >= {d}",
            xi.measured_defect(flow)
        )));
    }
    xi.defect = d;
    xi.seed = Some(seed);
    Ok(xi)
}

/// Annulus chain for the disk flow: follows an orbit hugging one of the
/// attracting circles r = 1/2 or r = 1 (where phase slips cost no radius),
/// with phase noise and a small radial amplitude.
pub fn annulus_phase_noise_chain(
    flow: &FlowSpec,
    d: f64,
    radial_amp: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA117);
    let circle = if rng.gen::<bool>() { 0.5 } else { 1.0 };
    // hug the circle from inside so the orbit's radial speed is negligible
    let r = circle * (1.0 - 0.01 * rng.gen::<f64>());
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    let x0 = flow.point(vec![r * th.cos(), r * th.sin()])?;
    let tangential = (0.9 * d).min((d * d * 0.81 - radial_amp * radial_amp).max(0.0).sqrt());
    noisy_orbit_chain(flow, &x0, d, &[radial_amp, tangential], t0, window, seed)
}

/// Chain that rides the attracting circle just above B(entry_radius, 0) with
/// phase noise, then enters the ball through a short stretch of
/// inward-directed jumps and is held inside by continued pushes. The entry
/// happens in the last third of the window.
pub fn inward_spiral_chain(
    flow: &FlowSpec,
    d: f64,
    radial_amp: f64,
    entry_radius: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB22);
    // attracting circle just above the entry ball; hugging it keeps the
    // orbit's radial speed negligible so phase slips stay cheap
    let circle = smallest_attracting_circle_at_or_above(entry_radius);
    let r_start = circle * (1.0 + 0.02 * rng.gen::<f64>());
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    let x0 = flow.point(vec![r_start * th.cos(), r_start * th.sin()])?;

    let (n_min, n_max) = window;
    let span = n_max - n_min;
    let descent_end = n_min + span * 2 / 3;
    let tangential = (0.85 * d).min((d * d * 0.81 - radial_amp * radial_amp).max(0.0).sqrt());
    // hugging part: orbit plus phase noise over [n_min, descent_end]
    let base = noisy_orbit_chain(
        flow,
        &x0,
        d,
        &[radial_amp, tangential],
        t0,
        (n_min, descent_end),
        seed,
    )?;
    let mut anchors = base.anchors.clone();
    // entry and hold: inward-directed jumps for the remaining anchors
    let origin = flow.point(vec![0.0, 0.0])?;
    let space = flow.space();
    let mut cur = anchors.last().unwrap().coords.clone();
    for _ in (descent_end + 1)..=n_max {
        let mut next = flow.eval_vec(t0, &cur);
        let mut v = vec![0.0; 2];
        space.chart_displacement(&next, &origin.coords, &mut v);
        let n = space.chart_norm(&v);
        if n > 1e-12 {
            let scale = (0.9 * d).min(n) / n;
            v.iter_mut().for_each(|c| *c *= scale);
            space.displace_capped(&mut next, &v, d * 0.9995);
        }
        anchors.push(MetricPoint { coords: next.clone(), space_id: x0.space_id });
        cur = next;
    }
    let mut xi = StepPseudotrajectory::from_anchors(flow, t0, n_min, anchors, Some(seed))?;
    if xi.measured_defect(flow) >= d {
        return Err(Error::param("inward chain exceeded its defect class".to_string()));
    }
    xi.defect = d;
    Ok(xi)
}

/// Chain for the both-stable-and-unstable origin: held deep inside
/// B(hold_radius, 0) by inward jumps at both ends of the window, released in
/// the middle so the flow carries it up to the attracting circle just above
/// `exit_radius` (leaving B(exit_radius, 0)), with pure phase noise while
/// outside. Produces the two-sided geometry split by an interior excursion.
pub fn excursion_chain(
    flow: &FlowSpec,
    d: f64,
    exit_radius: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC44);
    let circle = smallest_attracting_circle_at_or_above(exit_radius);
    let (n_min, n_max) = window;
    let span = n_max - n_min;
    let release = n_min + span / 4;
    let recapture = n_min + (span * 3) / 4;
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    // start deep: a point the inward holds keep below exit_radius
    let depth = (circle - 1.8 * 0.9 * d).min(exit_radius * 0.97);
    let x0 = flow.point(vec![depth * th.cos(), depth * th.sin()])?;
    let origin = flow.point(vec![0.0, 0.0])?;
    let space = flow.space();

    let mut anchors = Vec::with_capacity((span + 1) as usize);
    let mut cur = x0.coords.clone();
    anchors.push(x0.clone());
    for n in (n_min + 1)..=n_max {
        let mut next = flow.eval_vec(t0, &cur);
        if n <= release || n > recapture {
            // inward hold
            let mut v = vec![0.0; 2];
            space.chart_displacement(&next, &origin.coords, &mut v);
            let nn = space.chart_norm(&v);
            if nn > 1e-12 {
                let scale = (0.9 * d).min(nn) / nn;
                v.iter_mut().for_each(|c| *c *= scale);
                space.displace_capped(&mut next, &v, d * 0.9995);
            }
        } else {
            // released: pure phase noise riding the flow up to the circle
            let jt = 0.8 * d * (rng.gen::<f64>() * 2.0 - 1.0);
            space.displace_capped(&mut next, &[0.0, jt], d * 0.9995);
        }
        anchors.push(MetricPoint { coords: next.clone(), space_id: x0.space_id });
        cur = next;
    }
    let mut xi = StepPseudotrajectory::from_anchors(flow, t0, n_min, anchors, Some(seed))?;
    if xi.measured_defect(flow) >= d {
        return Err(Error::param("excursion chain exceeded its defect class".to_string()));
    }
    xi.defect = d;
    Ok(xi)
}

/// Largest attracting circle 2^-n strictly below r.
fn largest_attracting_circle_below(r: f64) -> f64 {
    let mut c = 1.0;
    while c >= r {
        c /= 2.0;
    }
    c
}

fn smallest_attracting_circle_at_or_above(r: f64) -> f64 {
    let mut c = 1.0;
    while c / 2.0 >= r {
        c /= 2.0;
    }
    c
}

/// North–south chain with uniform noise from a seeded start.
pub fn circle_chain(
    flow: &FlowSpec,
    d: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD55);
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    let x0 = flow.point(vec![th])?;
    noisy_orbit_chain(flow, &x0, d, &[0.9 * d], t0, window, seed)
}

/// Product chain for the pausing-near-origin scenario: the disk component
/// follows an orbit in a band near the origin with phase noise (inside
/// B(pause_radius, 0)), the circle component is the exact crossing orbit
/// passing mid-transit at window time 0.
pub fn product_pause_chain(
    product: &FlowSpec,
    d: f64,
    pause_radius: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE66);
    let circle = largest_attracting_circle_below(pause_radius * 0.95);
    let r = circle * (1.0 + 0.35 * rng.gen::<f64>());
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    let x0 = product.point(vec![r * th.cos(), r * th.sin(), 2.0])?;
    // noise only on the disk factor, tangential
    noisy_orbit_chain(
        product,
        &x0,
        d,
        &[0.0, 0.85 * d, 0.0],
        t0,
        window,
        seed,
    )
}

/// Product chain for the crossing scenario: the disk component is an exact
/// annulus orbit, the circle component crosses from near the repelling pole
/// to the attracting pole carrying noise of amplitude `d2`.
pub fn product_crossing_chain(
    product: &FlowSpec,
    d: f64,
    d2: f64,
    t0: f64,
    window: (i64, i64),
    seed: u64,
) -> Result<StepPseudotrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF77);
    let r = 0.45 + 0.5 * rng.gen::<f64>();
    let th = rng.gen::<f64>() * std::f64::consts::TAU;
    // the circle factor sits mid-transit at window time 0
    let x0 = product.point(vec![r * th.cos(), r * th.sin(), 2.0])?;
    noisy_orbit_chain(product, &x0, d, &[0.0, 0.0, d2], t0, window, seed)
}

/// Deterministic negative control: past hugging the repelling circle r = 3/4
/// (the separatrix between the attracting circles r = 1/2 and r = 1), one
/// radial jump of exactly `jump` outward, future ascending to r = 1.
pub fn separatrix_jump_chain(
    flow: &FlowSpec,
    jump: f64,
    t0: f64,
    window: (i64, i64),
) -> Result<StepPseudotrajectory> {
    let (n_min, n_max) = window;
    let x_pre = flow.point(vec![0.70, 0.0])?;
    let mut anchors = Vec::with_capacity((n_max - n_min + 1) as usize);
    for n in n_min..=0 {
        anchors.push(MetricPoint {
            coords: flow.eval_vec(n as f64 * t0, &x_pre.coords),
            space_id: x_pre.space_id,
        });
    }
    // one radial jump of the stated size, crossing the separatrix
    let mut cur = flow.eval_vec(t0, &x_pre.coords);
    let r = (cur[0] * cur[0] + cur[1] * cur[1]).sqrt();
    let scale = (r + jump) / r;
    cur[0] *= scale;
    cur[1] *= scale;
    anchors.push(MetricPoint { coords: cur.clone(), space_id: x_pre.space_id });
    for _ in 2..=(n_max.max(1)) {
        cur = flow.eval_vec(t0, &cur);
        anchors.push(MetricPoint { coords: cur.clone(), space_id: x_pre.space_id });
    }
    StepPseudotrajectory::from_anchors(flow, t0, n_min, anchors, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{build_disk_flow, build_north_south_circle, build_product_flow};
    use crate::pseudo::{validate_ps, PseudoInput};

    fn radius(c: &[f64]) -> f64 {
        (c[0] * c[0] + c[1] * c[1]).sqrt()
    }

    #[test]
    fn phase_noise_chain_keeps_radius_tight() {
        let flow = build_disk_flow();
        let xi = annulus_phase_noise_chain(&flow, 0.01, 1e-5, 0.5, (0, 60), 3).unwrap();
        assert!(xi.measured_defect(&flow) < 0.01);
        let r0 = radius(&xi.anchors[0].coords);
        // radii stay near the orbit's radial profile: within a few radial amps
        // plus the orbit's own drift envelope
        let orbit_r = |t: f64| radius(&flow.eval_vec(t, &xi.anchors[0].coords));
        for (k, a) in xi.anchors.iter().enumerate() {
            let t = k as f64 * 0.5;
            assert!(
                (radius(&a.coords) - orbit_r(t)).abs() < 1e-4,
                "radial wander too large at anchor {k} (start radius {r0})"
            );
        }
    }

    #[test]
    fn inward_spiral_enters_and_stays() {
        let flow = build_disk_flow();
        let entry = 0.06;
        let xi = inward_spiral_chain(&flow, 0.0025, 1e-5, entry, 0.5, (0, 80), 7).unwrap();
        assert!(xi.measured_defect(&flow) < 0.0025);
        let radii: Vec<f64> = xi.anchors.iter().map(|a| radius(&a.coords)).collect();
        let first_in = radii.iter().position(|&r| r < entry).expect("never entered");
        // before entry the chain stays outside; after entry + a margin it
        // stays within the ε0/4-scale ball
        for (k, &r) in radii.iter().enumerate() {
            if k + 2 > first_in {
                assert!(r < 0.075, "left the trap at anchor {k}: r = {r}");
            }
        }
    }

    #[test]
    fn excursion_chain_exits_and_returns() {
        let flow = build_disk_flow();
        let exit = 0.06;
        let xi = excursion_chain(&flow, 0.0025, exit, 0.5, (-40, 40), 11).unwrap();
        assert!(xi.measured_defect(&flow) < 0.0025);
        let radii: Vec<f64> = xi.anchors.iter().map(|a| radius(&a.coords)).collect();
        let n = radii.len();
        assert!(radii[..n / 5].iter().all(|&r| r < exit), "early hold broken");
        assert!(radii[n - n / 5..].iter().all(|&r| r < exit), "late hold broken");
        assert!(
            radii.iter().any(|&r| r > exit),
            "never left the exit ball: max r = {}",
            radii.iter().cloned().fold(0.0, f64::max)
        );
        assert!(radii.iter().all(|&r| r < 0.075), "left the outer trap");
    }

    #[test]
    fn product_chains_have_the_declared_structure() {
        let product = build_product_flow(build_disk_flow(), build_north_south_circle());
        let xi = product_pause_chain(&product, 0.005, 0.06, 0.5, (-20, 20), 5).unwrap();
        assert!(xi.measured_defect(&product) < 0.005);
        for a in &xi.anchors {
            assert!(radius(&a.coords[..2]) < 0.06, "disk factor must pause near 0");
        }
        // circle factor is the exact crossing orbit
        let th0 = xi.anchors[0].coords[2];
        for (k, a) in xi.anchors.iter().enumerate() {
            let t = (k as i64 + xi.n_min) as f64 * 0.5 - xi.n_min as f64 * 0.5;
            let want = crate::flow::build_north_south_circle().eval_vec(t, &[th0]);
            assert!((a.coords[2] - want[0]).abs() < 1e-6, "circle factor noisy at {k}");
        }

        let xi = product_crossing_chain(&product, 0.01, 0.009, 0.5, (-25, 25), 6).unwrap();
        assert!(xi.measured_defect(&product) < 0.01);
        let r0 = radius(&xi.anchors[0].coords[..2]);
        for a in &xi.anchors {
            assert!(radius(&a.coords[..2]) > 0.38, "disk factor left the annulus");
        }
        // circle factor crosses: early angles near π side, late near 0 side
        let early = xi.anchors[0].coords[2];
        let late = xi.anchors.last().unwrap().coords[2];
        assert!(early > 2.0, "starts near the repelling side (r0 = {r0})");
        assert!(late < 1.0 || late > 5.5, "ends near the attracting pole");
    }

    #[test]
    fn negative_control_is_a_single_fat_jump() {
        let flow = build_disk_flow();
        let xi = separatrix_jump_chain(&flow, 0.1, 0.5, (-20, 20)).unwrap();
        let d = xi.measured_defect(&flow);
        assert!((d - 0.1).abs() < 1e-9, "measured defect {d}");
        let max_defect = validate_ps(&flow, &PseudoInput::Step(&xi)).unwrap();
        assert!(max_defect >= 0.1 - 1e-9);
        // past below the separatrix, future above and ascending to 1
        let radii: Vec<f64> = xi.anchors.iter().map(|a| radius(&a.coords)).collect();
        assert!(radii[..21].iter().all(|&r| r < 0.75));
        assert!(radii[21..].iter().all(|&r| r > 0.75));
        assert!(*radii.last().unwrap() > 0.9);
    }

    #[test]
    fn chains_are_reproducible() {
        let flow = build_disk_flow();
        let a = annulus_phase_noise_chain(&flow, 0.01, 1e-5, 0.5, (0, 30), 9).unwrap();
        let b = annulus_phase_noise_chain(&flow, 0.01, 1e-5, 0.5, (0, 30), 9).unwrap();
        for (p, q) in a.anchors.iter().zip(&b.anchors) {
            assert_eq!(p.coords, q.coords);
        }
    }
}
