//! Compact metric spaces underlying the built-in flows: the unit interval,
//! the closed unit disk, the circle, and finite products with the max metric.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Slack used when checking domain membership, so that points produced by
/// projection or flow evaluation are not rejected for last-ulp overshoot.
pub const DOMAIN_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    /// [0, 1] with the absolute-value metric.
    Interval,
    /// Closed unit disk in Cartesian coordinates with the Euclidean metric.
    Disk,
    /// Circle of circumference 2π; coordinate is an angle in [0, 2π),
    /// metric is arc length.
    Circle,
    /// Product with dist = max(dist1, dist2); coordinates concatenated.
    Product { first: Box<Space>, second: Box<Space> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceId(pub u64);

/// A point of a space, tagged with the fingerprint of the space it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub coords: Vec<f64>,
    pub space_id: SpaceId,
}

impl Space {
    pub fn dim(&self) -> usize {
        match self {
            Space::Interval | Space::Circle => 1,
            Space::Disk => 2,
            Space::Product { first, second } => first.dim() + second.dim(),
        }
    }

    pub fn id(&self) -> SpaceId {
        let mut h = DefaultHasher::new();
        self.hash_structure(&mut h);
        SpaceId(h.finish())
    }

    fn hash_structure(&self, h: &mut DefaultHasher) {
        match self {
            Space::Interval => 1u8.hash(h),
            Space::Disk => 2u8.hash(h),
            Space::Circle => 3u8.hash(h),
            Space::Product { first, second } => {
                4u8.hash(h);
                first.hash_structure(h);
                second.hash_structure(h);
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Space::Interval => x[0] >= -DOMAIN_TOL && x[0] <= 1.0 + DOMAIN_TOL,
            Space::Disk => (x[0] * x[0] + x[1] * x[1]).sqrt() <= 1.0 + DOMAIN_TOL,
            Space::Circle => x[0] >= -DOMAIN_TOL && x[0] < TWO_PI + DOMAIN_TOL,
            Space::Product { first, second } => {
                let k = first.dim();
                first.contains(&x[..k]) && second.contains(&x[k..])
            }
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Space::Interval => (a[0] - b[0]).abs(),
            Space::Disk => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
            Space::Circle => {
                let d = (a[0] - b[0]).rem_euclid(TWO_PI);
                d.min(TWO_PI - d)
            }
            Space::Product { first, second } => {
                let k = first.dim();
                first
                    .distance(&a[..k], &b[..k])
                    .max(second.distance(&a[k..], &b[k..]))
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Space::Interval => 1.0,
            Space::Disk => 2.0,
            Space::Circle => std::f64::consts::PI,
            Space::Product { first, second } => first.diameter().max(second.diameter()),
        }
    }

    /// Clamp/wrap coordinates into the compact domain.
    pub fn project(&self, x: &mut [f64]) {
        match self {
            Space::Interval => x[0] = x[0].clamp(0.0, 1.0),
            Space::Disk => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r > 1.0 {
                    x[0] /= r;
                    x[1] /= r;
                }
            }
            Space::Circle => x[0] = x[0].rem_euclid(TWO_PI),
            Space::Product { first, second } => {
                let k = first.dim();
                let (a, b) = x.split_at_mut(k);
                first.project(a);
                second.project(b);
            }
        }
    }

    /// Displacement from `from` toward `to` in chart coordinates: signed arc
    /// on the circle, (dr, dθ·r) in polar coordinates on the disk, and the
    /// concatenation on products. The chart norm of the result approximates
    /// the metric distance for small displacements.
    pub fn chart_displacement(&self, from: &[f64], to: &[f64], out: &mut [f64]) {
        match self {
            Space::Interval => out[0] = to[0] - from[0],
            Space::Disk => {
                let rf = (from[0] * from[0] + from[1] * from[1]).sqrt();
                let rt = (to[0] * to[0] + to[1] * to[1]).sqrt();
                if rf < 1e-300 {
                    // at the origin the polar chart degenerates; fall back to
                    // Cartesian (consistent with apply_chart_displacement)
                    out[0] = to[0] - from[0];
                    out[1] = to[1] - from[1];
                    return;
                }
                let tf = from[1].atan2(from[0]);
                // a target at the origin is purely radial
                let tt = if rt < 1e-300 { tf } else { to[1].atan2(to[0]) };
                let mut dth = (tt - tf).rem_euclid(TWO_PI);
                if dth > std::f64::consts::PI {
                    dth -= TWO_PI;
                }
                out[0] = rt - rf;
                out[1] = dth * rf;
            }
            Space::Circle => {
                let mut d = (to[0] - from[0]).rem_euclid(TWO_PI);
                if d > std::f64::consts::PI {
                    d -= TWO_PI;
                }
                out[0] = d;
            }
            Space::Product { first, second } => {
                let k = first.dim();
                first.chart_displacement(&from[..k], &to[..k], &mut out[..k]);
                second.chart_displacement(&from[k..], &to[k..], &mut out[k..]);
            }
        }
    }

    /// Apply a chart displacement to `x` in place (inverse of the chart used
    /// by [`Space::chart_displacement`]), then project into the domain.
    pub fn apply_chart_displacement(&self, x: &mut [f64], v: &[f64]) {
        match self {
            Space::Interval => x[0] += v[0],
            Space::Disk => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r < 1e-300 {
                    x[0] += v[0];
                    x[1] += v[1];
                } else {
                    let th = x[1].atan2(x[0]);
                    let nr = (r + v[0]).max(0.0);
                    let nth = th + v[1] / r;
                    x[0] = nr * nth.cos();
                    x[1] = nr * nth.sin();
                }
            }
            Space::Circle => x[0] += v[0],
            Space::Product { first, second } => {
                let k = first.dim();
                let (a, b) = x.split_at_mut(k);
                first.apply_chart_displacement(a, &v[..k]);
                second.apply_chart_displacement(b, &v[k..]);
            }
        }
        self.project(x);
    }

    /// Apply a chart displacement, shrinking it geometrically until the
    /// metric displacement stays strictly below `cap` (the chart norm is only
    /// a first-order proxy for the metric on the disk).
    pub fn displace_capped(&self, x: &mut [f64], v: &[f64], cap: f64) {
        let orig = x.to_vec();
        let mut scale = 1.0;
        loop {
            let vv: Vec<f64> = v.iter().map(|c| c * scale).collect();
            let mut trial = orig.clone();
            self.apply_chart_displacement(&mut trial, &vv);
            if self.distance(&orig, &trial) < cap {
                x.copy_from_slice(&trial);
                return;
            }
            scale *= 0.95;
            if scale < 1e-9 {
                x.copy_from_slice(&orig);
                return;
            }
        }
    }

    /// Euclidean chart norm matching the max-metric structure on products.
    pub fn chart_norm(&self, v: &[f64]) -> f64 {
        match self {
            Space::Interval | Space::Circle => v[0].abs(),
            Space::Disk => (v[0] * v[0] + v[1] * v[1]).sqrt(),
            Space::Product { first, second } => {
                let k = first.dim();
                first.chart_norm(&v[..k]).max(second.chart_norm(&v[k..]))
            }
        }
    }

    /// Centers of a grid cover with pitch `mesh`. Every point of the space is
    /// within one mesh of some center.
    pub fn grid_cover(&self, mesh: f64) -> Vec<Vec<f64>> {
        assert!(mesh > 0.0, "mesh must be positive");
        match self {
            Space::Interval => {
                let n = (1.0 / mesh).ceil() as usize + 1;
                (0..n).map(|i| vec![(i as f64 * mesh).min(1.0)]).collect()
            }
            Space::Circle => {
                let n = (TWO_PI / mesh).ceil() as usize;
                (0..n).map(|i| vec![i as f64 * TWO_PI / n as f64]).collect()
            }
            Space::Disk => {
                let n = (2.0 / mesh).ceil() as i64 + 1;
                let mut out = Vec::new();
                for i in -n..=n {
                    for j in -n..=n {
                        let x = i as f64 * mesh;
                        let y = j as f64 * mesh;
                        if x * x + y * y <= 1.0 {
                            out.push(vec![x, y]);
                        }
                    }
                }
                out
            }
            Space::Product { first, second } => {
                let a = first.grid_cover(mesh);
                let b = second.grid_cover(mesh);
                let mut out = Vec::with_capacity(a.len() * b.len());
                for p in &a {
                    for q in &b {
                        let mut c = p.clone();
                        c.extend_from_slice(q);
                        out.push(c);
                    }
                }
                out
            }
        }
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        match self {
            Space::Interval => vec![rng.gen::<f64>()],
            Space::Circle => vec![rng.gen::<f64>() * TWO_PI],
            Space::Disk => loop {
                let x = rng.gen::<f64>() * 2.0 - 1.0;
                let y = rng.gen::<f64>() * 2.0 - 1.0;
                if x * x + y * y <= 1.0 {
                    break vec![x, y];
                }
            },
            Space::Product { first, second } => {
                let mut c = first.sample(rng);
                c.extend_from_slice(&second.sample(rng));
                c
            }
        }
    }

    pub fn point(&self, coords: Vec<f64>) -> Result<MetricPoint> {
        if !self.contains(&coords) {
            return Err(Error::domain(format!(
                "coordinates {coords:?} lie outside the declared compact domain"
            )));
        }
        let mut coords = coords;
        self.project(&mut coords);
        Ok(MetricPoint {
            coords,
            space_id: self.id(),
        })
    }
}

impl MetricPoint {
    pub fn dist(&self, space: &Space, other: &MetricPoint) -> f64 {
        space.distance(&self.coords, &other.coords)
    }
}
