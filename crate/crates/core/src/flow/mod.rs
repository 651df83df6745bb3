//! Topological flows on compact metric spaces: the disk flow with nested
//! attracting/repelling circles, the north–south circle flow, interval
//! suspensions of monotone maps, and direct products under the max metric.

pub mod north_south;
pub mod radial;
pub mod suspension;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{MetricPoint, Space, TWO_PI};
pub use radial::time_one_map_radial;
pub use suspension::PiecewiseMonotone;

/// Evaluation tolerance for exactly-constructed flows (suspensions, products
/// of such). Integrated flows (north–south) are held to `TOL_FLOW_INTEGRATED`.
pub const TOL_FLOW: f64 = 1e-9;
pub const TOL_FLOW_INTEGRATED: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityTag {
    Stable,
    Unstable,
    Both,
    None,
}

impl StabilityTag {
    pub fn is_stable(self) -> bool {
        matches!(self, StabilityTag::Stable | StabilityTag::Both)
    }
    pub fn is_unstable(self) -> bool {
        matches!(self, StabilityTag::Unstable | StabilityTag::Both)
    }
    fn from_flags(stable: bool, unstable: bool) -> Self {
        match (stable, unstable) {
            (true, true) => StabilityTag::Both,
            (true, false) => StabilityTag::Stable,
            (false, true) => StabilityTag::Unstable,
            (false, false) => StabilityTag::None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Singularity {
    pub point: MetricPoint,
    pub stability: StabilityTag,
}

#[derive(Clone, Debug)]
enum FlowKind {
    Disk,
    NorthSouth,
    IntervalSuspension { map: PiecewiseMonotone },
    Product { first: Box<FlowSpec>, second: Box<FlowSpec> },
    TimeReversed { inner: Box<FlowSpec> },
}

/// A flow φ: ℝ × M → M together with its space, singularity registry, and the
/// flag recording whether the limit set consists of the singularities alone.
#[derive(Clone, Debug)]
pub struct FlowSpec {
    kind: FlowKind,
    space: Space,
    singularities: Vec<Singularity>,
    limit_set_is_singularities: bool,
}

/// Serialized form; behavior (not bit layout) round-trips.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowDescriptor {
    Disk,
    NorthSouth,
    IntervalSuspension { knots: Vec<(f64, f64)> },
    Product {
        first: Box<FlowDescriptor>,
        second: Box<FlowDescriptor>,
    },
    TimeReversed { inner: Box<FlowDescriptor> },
}

pub fn build_disk_flow() -> FlowSpec {
    let space = Space::Disk;
    let origin = space.point(vec![0.0, 0.0]).unwrap();
    FlowSpec {
        kind: FlowKind::Disk,
        singularities: vec![Singularity {
            point: origin,
            stability: StabilityTag::Both,
        }],
        limit_set_is_singularities: false,
        space,
    }
}

pub fn build_north_south_circle() -> FlowSpec {
    let space = Space::Circle;
    let north = space.point(vec![0.0]).unwrap();
    let south = space.point(vec![std::f64::consts::PI]).unwrap();
    FlowSpec {
        kind: FlowKind::NorthSouth,
        singularities: vec![
            Singularity {
                point: north,
                stability: StabilityTag::Stable,
            },
            Singularity {
                point: south,
                stability: StabilityTag::Unstable,
            },
        ],
        limit_set_is_singularities: true,
        space,
    }
}

pub fn build_interval_suspension(map: PiecewiseMonotone) -> FlowSpec {
    let space = Space::Interval;
    let singularities = map
        .fixed_points()
        .iter()
        .map(|&p| {
            let (ls, rs) = map.side_slopes(p);
            let stable = ls.map_or(true, |s| s < 1.0) && rs.map_or(true, |s| s < 1.0);
            let unstable = ls.map_or(true, |s| s > 1.0) && rs.map_or(true, |s| s > 1.0);
            Singularity {
                point: space.point(vec![p]).unwrap(),
                stability: StabilityTag::from_flags(stable, unstable),
            }
        })
        .collect();
    FlowSpec {
        kind: FlowKind::IntervalSuspension { map },
        singularities,
        limit_set_is_singularities: true,
        space,
    }
}

pub fn build_product_flow(first: FlowSpec, second: FlowSpec) -> FlowSpec {
    let space = Space::Product {
        first: Box::new(first.space.clone()),
        second: Box::new(second.space.clone()),
    };
    let mut singularities = Vec::new();
    for a in &first.singularities {
        for b in &second.singularities {
            let mut coords = a.point.coords.clone();
            coords.extend_from_slice(&b.point.coords);
            singularities.push(Singularity {
                point: space.point(coords).unwrap(),
                stability: StabilityTag::from_flags(
                    a.stability.is_stable() && b.stability.is_stable(),
                    a.stability.is_unstable() && b.stability.is_unstable(),
                ),
            });
        }
    }
    let limit = first.limit_set_is_singularities && second.limit_set_is_singularities;
    FlowSpec {
        kind: FlowKind::Product {
            first: Box::new(first),
            second: Box::new(second),
        },
        space,
        singularities,
        limit_set_is_singularities: limit,
    }
}

/// The flow t ↦ φ(-t, ·): same space, stability tags swapped.
pub fn build_time_reversed(inner: FlowSpec) -> FlowSpec {
    let singularities = inner
        .singularities
        .iter()
        .map(|s| Singularity {
            point: s.point.clone(),
            stability: StabilityTag::from_flags(
                s.stability.is_unstable(),
                s.stability.is_stable(),
            ),
        })
        .collect();
    FlowSpec {
        space: inner.space.clone(),
        singularities,
        limit_set_is_singularities: inner.limit_set_is_singularities,
        kind: FlowKind::TimeReversed { inner: Box::new(inner) },
    }
}

impl FlowSpec {
    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn singularities(&self) -> &[Singularity] {
        &self.singularities
    }

    pub fn limit_set_is_singularities(&self) -> bool {
        self.limit_set_is_singularities
    }

    pub fn components(&self) -> Option<(&FlowSpec, &FlowSpec)> {
        match &self.kind {
            FlowKind::Product { first, second } => Some((first, second)),
            _ => None,
        }
    }

    pub fn descriptor(&self) -> FlowDescriptor {
        match &self.kind {
            FlowKind::Disk => FlowDescriptor::Disk,
            FlowKind::NorthSouth => FlowDescriptor::NorthSouth,
            FlowKind::IntervalSuspension { map } => FlowDescriptor::IntervalSuspension {
                knots: map.knots().to_vec(),
            },
            FlowKind::Product { first, second } => FlowDescriptor::Product {
                first: Box::new(first.descriptor()),
                second: Box::new(second.descriptor()),
            },
            FlowKind::TimeReversed { inner } => FlowDescriptor::TimeReversed {
                inner: Box::new(inner.descriptor()),
            },
        }
    }

    pub fn from_descriptor(d: &FlowDescriptor) -> Result<FlowSpec> {
        Ok(match d {
            FlowDescriptor::Disk => build_disk_flow(),
            FlowDescriptor::NorthSouth => build_north_south_circle(),
            FlowDescriptor::IntervalSuspension { knots } => {
                build_interval_suspension(PiecewiseMonotone::new(knots.clone())?)
            }
            FlowDescriptor::Product { first, second } => build_product_flow(
                FlowSpec::from_descriptor(first)?,
                FlowSpec::from_descriptor(second)?,
            ),
            FlowDescriptor::TimeReversed { inner } => {
                build_time_reversed(FlowSpec::from_descriptor(inner)?)
            }
        })
    }

    /// Stable fingerprint of the flow's descriptor, used to tie saved
    /// trajectories and certificates back to the flow that produced them.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        serde_json::to_string(&self.descriptor()).unwrap().hash(&mut h);
        h.finish()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.space.distance(a, b)
    }

    /// Raw evaluation; assumes coordinates are valid for this flow's space.
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FlowKind::Disk => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r < 1e-300 {
                    out[0] = 0.0;
                    out[1] = 0.0;
                    return;
                }
                let theta = x[1].atan2(x[0]);
                let nr = suspension::suspension_eval(&suspension::DiskRadial, t, r.min(1.0));
                let nth = theta + TWO_PI * t;
                out[0] = nr * nth.cos();
                out[1] = nr * nth.sin();
            }
            FlowKind::NorthSouth => out[0] = north_south::evaluate(t, x[0]),
            FlowKind::IntervalSuspension { map } => {
                out[0] = suspension::suspension_eval(map, t, x[0].clamp(0.0, 1.0))
            }
            FlowKind::Product { first, second } => {
                let k = first.dim();
                first.eval_into(t, &x[..k], &mut out[..k]);
                second.eval_into(t, &x[k..], &mut out[k..]);
            }
            FlowKind::TimeReversed { inner } => inner.eval_into(-t, x, out),
        }
    }

    pub fn eval_vec(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, x, &mut out);
        out
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<MetricPoint> {
        self.space.point(coords)
    }

    /// φ(t, x) with domain checking; deterministic for fixed inputs.
    pub fn evaluate(&self, t: f64, x: &MetricPoint) -> Result<MetricPoint> {
        if !t.is_finite() {
            return Err(Error::param(format!("time {t} is not finite")));
        }
        if x.space_id != self.space.id() {
            return Err(Error::domain("point belongs to a different space".to_string()));
        }
        if !self.space.contains(&x.coords) {
            return Err(Error::domain(format!(
                "point {:?} lies outside the flow's domain",
                x.coords
            )));
        }
        let out = self.eval_vec(t, &x.coords);
        self.space.point(out)
    }

    /// Largest displacement dist(x, φ(t, x)) over the given sample points.
    pub fn sup_displacement(&self, samples: &[Vec<f64>], t: f64) -> f64 {
        let mut out = vec![0.0; self.dim()];
        samples
            .iter()
            .map(|x| {
                self.eval_into(t, x, &mut out);
                self.distance(x, &out)
            })
            .fold(0.0, f64::max)
    }

    /// Measured maximum speed: sup over samples of dist(x, φ(h, x))/h.
    pub fn max_speed(&self, samples: &[Vec<f64>]) -> f64 {
        let h = 1e-3;
        self.sup_displacement(samples, h) / h
    }

    /// Fill `rows` orbit samples φ((j - anchor_row)·ds, x) into a flat
    /// dim-strided buffer; row `anchor_row` is x itself and the sweep runs
    /// outward in both directions (going through an attracting singularity
    /// and back would destroy the orbit's phase). The disk flow takes a fast
    /// path: the angle advances exactly while the radial coordinate comes
    /// from a fine one-dimensional orbit, interpolated when ds is below the
    /// radial pitch.
    pub fn orbit_row_samples(&self, x: &[f64], anchor_row: usize, ds: f64, rows: usize) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; rows * dim];
        self.orbit_rows_into(x, anchor_row, ds, rows, &mut out);
        out
    }

    fn orbit_rows_into(&self, x: &[f64], anchor_row: usize, ds: f64, rows: usize, out: &mut [f64]) {
        debug_assert!(anchor_row < rows);
        match &self.kind {
            FlowKind::Disk => {
                let r0 = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r0 < 1e-300 {
                    out.fill(0.0);
                    return;
                }
                let th0 = x[1].atan2(x[0]);
                // radial pitch: fine enough that linear interpolation across
                // the radial map's slope kinks stays far below match gates
                let q = ds.max(5e-5);
                let radial: Vec<f64> = if q <= ds * (1.0 + 1e-12) {
                    let mut v = vec![0.0; rows];
                    v[anchor_row] = r0;
                    let mut r = r0;
                    for item in v.iter_mut().take(rows).skip(anchor_row + 1) {
                        r = suspension::suspension_eval(&suspension::DiskRadial, ds, r);
                        *item = r;
                    }
                    r = r0;
                    for j in (0..anchor_row).rev() {
                        r = suspension::suspension_eval(&suspension::DiskRadial, -ds, r);
                        v[j] = r;
                    }
                    for (j, &rj) in v.iter().enumerate() {
                        let s = (j as f64 - anchor_row as f64) * ds;
                        let th = th0 + TWO_PI * s;
                        out[j * 2] = rj * th.cos();
                        out[j * 2 + 1] = rj * th.sin();
                    }
                    return;
                } else {
                    // fine radial grid swept outward from the anchor
                    let span_up = (rows - 1 - anchor_row) as f64 * ds;
                    let span_dn = anchor_row as f64 * ds;
                    let m_up = (span_up / q).ceil() as usize + 1;
                    let m_dn = (span_dn / q).ceil() as usize + 1;
                    let mut grid = vec![0.0; m_up + m_dn + 1];
                    grid[m_dn] = r0;
                    let mut r = r0;
                    for k in 1..=m_up {
                        r = suspension::suspension_eval(&suspension::DiskRadial, q, r);
                        grid[m_dn + k] = r;
                    }
                    r = r0;
                    for k in 1..=m_dn {
                        r = suspension::suspension_eval(&suspension::DiskRadial, -q, r);
                        grid[m_dn - k] = r;
                    }
                    (0..rows)
                        .map(|j| {
                            let s = (j as f64 - anchor_row as f64) * ds;
                            let pos = m_dn as f64 + s / q;
                            let k = (pos.floor().max(0.0) as usize).min(grid.len() - 2);
                            let frac = (pos - k as f64).clamp(0.0, 1.0);
                            grid[k] + frac * (grid[k + 1] - grid[k])
                        })
                        .collect()
                };
                for (j, &rj) in radial.iter().enumerate() {
                    let s = (j as f64 - anchor_row as f64) * ds;
                    let th = th0 + TWO_PI * s;
                    out[j * 2] = rj * th.cos();
                    out[j * 2 + 1] = rj * th.sin();
                }
            }
            FlowKind::Product { first, second } => {
                let k = first.dim();
                let dim = self.dim();
                let a = first.orbit_row_samples(&x[..k], anchor_row, ds, rows);
                let b = second.orbit_row_samples(&x[k..], anchor_row, ds, rows);
                for j in 0..rows {
                    out[j * dim..j * dim + k].copy_from_slice(&a[j * k..(j + 1) * k]);
                    out[j * dim + k..(j + 1) * dim]
                        .copy_from_slice(&b[j * (dim - k)..(j + 1) * (dim - k)]);
                }
            }
            _ => {
                let dim = self.dim();
                out[anchor_row * dim..(anchor_row + 1) * dim].copy_from_slice(x);
                let mut cur = x.to_vec();
                let mut nxt = vec![0.0; dim];
                for j in (anchor_row + 1)..rows {
                    self.eval_into(ds, &cur, &mut nxt);
                    out[j * dim..(j + 1) * dim].copy_from_slice(&nxt);
                    std::mem::swap(&mut cur, &mut nxt);
                }
                cur.copy_from_slice(x);
                for j in (0..anchor_row).rev() {
                    self.eval_into(-ds, &cur, &mut nxt);
                    out[j * dim..(j + 1) * dim].copy_from_slice(&nxt);
                    std::mem::swap(&mut cur, &mut nxt);
                }
            }
        }
    }
}

impl Serialize for FlowSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.descriptor().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FlowSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let desc = FlowDescriptor::deserialize(d)?;
        FlowSpec::from_descriptor(&desc).map_err(serde::de::Error::custom)
    }
}

/// A sampled orbit: points[k] = φ(times[k], start).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledOrbit {
    pub start: MetricPoint,
    pub times: Vec<f64>,
    pub points: Vec<MetricPoint>,
}

/// Sample φ(t, x) over [t0, t1] at the given pitch; the final time is
/// clamped to t1.
pub fn orbit_segment(
    flow: &FlowSpec,
    x: &MetricPoint,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<SampledOrbit> {
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::param(format!("step {step} must be positive")));
    }
    if t0 >= t1 {
        return Err(Error::param(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    let mut times = Vec::new();
    let mut t = t0;
    while t < t1 {
        times.push(t);
        t += step;
    }
    times.push(t1);
    let points = times
        .iter()
        .map(|&ti| flow.evaluate(ti, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampledOrbit {
        start: x.clone(),
        times,
        points,
    })
}
