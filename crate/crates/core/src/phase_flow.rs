//! Unit-speed geodesic flow on the cosphere bundle.
//!
//! Two manifolds are supported: flat tori of dimension one or two with
//! arbitrary periods, and the round unit sphere embedded in R^3. Covectors
//! are identified with tangent vectors through the metric.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{acos, cos, floor, sin, sqrt};

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldModel {
    /// R^d / (L_1 Z x ... x L_d Z) with d in {1, 2}.
    FlatTorus { periods: Vec<f64> },
    /// Unit sphere in R^3.
    RoundSphere,
}

/// A point `(x, xi)` with `|xi| = 1`.
///
/// On the torus both slices have length `d`; on the sphere both live in R^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    len: usize,
    x: [f64; 3],
    xi: [f64; 3],
}

impl PhasePoint {
    pub fn new(x: &[f64], xi: &[f64]) -> Result<Self> {
        if x.len() != xi.len() || x.is_empty() || x.len() > 3 {
            return Err(Error::InvalidPhasePoint(format!(
                "coordinate lengths {} and {}",
                x.len(),
                xi.len()
            )));
        }
        let mut p = PhasePoint { len: x.len(), x: [0.0; 3], xi: [0.0; 3] };
        p.x[..x.len()].copy_from_slice(x);
        p.xi[..xi.len()].copy_from_slice(xi);
        Ok(p)
    }

    pub fn x(&self) -> &[f64] {
        &self.x[..self.len]
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi[..self.len]
    }

    /// Number of coordinates in use.
    pub fn dim(&self) -> usize {
        self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = norm(&a);
    [a[0] / n, a[1] / n, a[2] / n]
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x - period * floor(x / period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Signed representative of `x` modulo `period` in `[-period/2, period/2)`.
pub fn wrap_centered(x: f64, period: f64) -> f64 {
    wrap(x + 0.5 * period, period) - 0.5 * period
}

impl ManifoldModel {
    pub fn circle(period: f64) -> Result<Self> {
        Self::torus(&[period])
    }

    pub fn torus(periods: &[f64]) -> Result<Self> {
        if periods.is_empty() || periods.len() > 2 {
            return Err(Error::UnsupportedManifold(format!(
                "flat torus of dimension {}",
                periods.len()
            )));
        }
        if periods.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::UnsupportedManifold("torus periods must be positive".into()));
        }
        Ok(ManifoldModel::FlatTorus { periods: periods.to_vec() })
    }

    pub fn sphere() -> Self {
        ManifoldModel::RoundSphere
    }

    /// Number of coordinates used for `x` and `xi`.
    pub fn coord_len(&self) -> usize {
        match self {
            ManifoldModel::FlatTorus { periods } => periods.len(),
            ManifoldModel::RoundSphere => 3,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, ManifoldModel::FlatTorus { .. })
    }

    pub fn validate(&self, p: &PhasePoint) -> Result<()> {
        if p.dim() != self.coord_len() {
            return Err(Error::InvalidPhasePoint(format!(
                "expected {} coordinates, got {}",
                self.coord_len(),
                p.dim()
            )));
        }
        if p.x().iter().chain(p.xi()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPhasePoint("non-finite coordinate".into()));
        }
        if (norm(p.xi()) - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPhasePoint(format!("|xi| = {}", norm(p.xi()))));
        }
        if let ManifoldModel::RoundSphere = self {
            if (norm(p.x()) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidPhasePoint(format!("|x| = {}", norm(p.x()))));
            }
            if dot(p.x(), p.xi()).abs() > UNIT_TOL {
                return Err(Error::InvalidPhasePoint("xi is not tangent to the sphere".into()));
            }
        }
        Ok(())
    }

    /// Geodesic distance between two base points.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ManifoldModel::FlatTorus { periods } => {
                let s: f64 = periods
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| {
                        let d = wrap_centered(a[i] - b[i], l);
                        d * d
                    })
                    .sum();
                sqrt(s)
            }
            ManifoldModel::RoundSphere => acos(dot(&a[..3], &b[..3]).clamp(-1.0, 1.0)),
        }
    }

    /// Typical distance between neighbouring base points of a sample.
    pub fn grid_spacing(&self, n_x: usize) -> f64 {
        let n = n_x.max(1) as f64;
        match self {
            ManifoldModel::FlatTorus { periods } => {
                periods.iter().fold(0.0, |m: f64, &l| m.max(l / n))
            }
            ManifoldModel::RoundSphere => sqrt(4.0 * PI / n),
        }
    }
}

/// Moves `p` for time `t` along the geodesic flow.
pub fn flow(m: &ManifoldModel, p: &PhasePoint, t: f64) -> PhasePoint {
    match m {
        ManifoldModel::FlatTorus { periods } => {
            let mut q = *p;
            for (i, &l) in periods.iter().enumerate() {
                q.x[i] = wrap(p.x[i] + t * p.xi[i], l);
            }
            q
        }
        ManifoldModel::RoundSphere => {
            let (s, c) = (sin(t), cos(t));
            let mut q = *p;
            for i in 0..3 {
                q.x[i] = c * p.x[i] + s * p.xi[i];
                q.xi[i] = -s * p.x[i] + c * p.xi[i];
            }
            q
        }
    }
}

/// `(x, xi) -> (x, -xi)`.
pub fn involution(p: &PhasePoint) -> PhasePoint {
    let mut q = *p;
    for v in q.xi.iter_mut() {
        *v = -*v;
    }
    q
}

fn tangent_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if x[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let d = a[0] * x[0] + a[1] * x[1] + a[2] * x[2];
    let e1 = unit([a[0] - d * x[0], a[1] - d * x[1], a[2] - d * x[2]]);
    let e2 = cross(x, e1);
    (e1, e2)
}

/// Deterministic sample of the unit cosphere bundle.
///
/// Points are ordered base point first, direction second. On the circle only
/// the two directions `+1, -1` exist, so at most two are used. On the 2-torus
/// `n_x` is the number of points per axis. On the sphere base points follow a
/// Fibonacci lattice.
pub fn sample_cosphere(m: &ManifoldModel, n_x: usize, n_dir: usize) -> Result<Vec<PhasePoint>> {
    if n_x == 0 || n_dir == 0 {
        return Err(Error::InvalidSampling(format!("n_x = {n_x}, n_dir = {n_dir}")));
    }
    let angle = |j: usize| 2.0 * PI * j as f64 / n_dir as f64;
    let mut out = Vec::new();
    match m {
        ManifoldModel::FlatTorus { periods } if periods.len() == 1 => {
            let l = periods[0];
            for i in 0..n_x {
                let x = l * i as f64 / n_x as f64;
                for &d in [1.0, -1.0].iter().take(n_dir.min(2)) {
                    out.push(PhasePoint::new(&[x], &[d])?);
                }
            }
        }
        ManifoldModel::FlatTorus { periods } => {
            for i in 0..n_x {
                for j in 0..n_x {
                    let x = [
                        periods[0] * i as f64 / n_x as f64,
                        periods[1] * j as f64 / n_x as f64,
                    ];
                    for k in 0..n_dir {
                        let th = angle(k);
                        out.push(PhasePoint::new(&x, &[cos(th), sin(th)])?);
                    }
                }
            }
        }
        ManifoldModel::RoundSphere => {
            let golden = PI * (3.0 - sqrt(5.0));
            for i in 0..n_x {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / n_x as f64;
                let r = sqrt((1.0 - z * z).max(0.0));
                let ph = golden * i as f64;
                let x = unit([r * cos(ph), r * sin(ph), z]);
                let (e1, e2) = tangent_frame(x);
                for k in 0..n_dir {
                    let (s, c) = (sin(angle(k)), cos(angle(k)));
                    let xi = unit([
                        c * e1[0] + s * e2[0],
                        c * e1[1] + s * e2[1],
                        c * e1[2] + s * e2[2],
                    ]);
                    out.push(PhasePoint::new(&x, &xi)?);
                }
            }
        }
    }
    Ok(out)
}

/// Neighbours of `p` at half the sample spacing, used for a local refinement.
pub fn refine_around(m: &ManifoldModel, p: &PhasePoint, n_x: usize, n_dir: usize) -> Vec<PhasePoint> {
    let half_dir = PI / n_dir.max(1) as f64;
    let mut out = Vec::new();
    match m {
        ManifoldModel::FlatTorus { periods } => {
            let d = periods.len();
            let steps: Vec<f64> = periods.iter().map(|l| 0.5 * l / n_x.max(1) as f64).collect();
            let offsets: &[[i32; 2]] = if d == 1 {
                &[[-1, 0], [1, 0]]
            } else {
                &[[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 1], [1, -1], [1, 0], [1, 1]]
            };
            for o in offsets {
                let mut q = *p;
                for i in 0..d {
                    q.x[i] = wrap(p.x[i] + o[i] as f64 * steps[i], periods[i]);
                }
                out.push(q);
            }
            if d == 2 {
                for s in [-1.0, 1.0] {
                    let th = s * half_dir;
                    let mut q = *p;
                    q.xi[0] = cos(th) * p.xi[0] - sin(th) * p.xi[1];
                    q.xi[1] = sin(th) * p.xi[0] + cos(th) * p.xi[1];
                    out.push(q);
                }
            }
        }
        ManifoldModel::RoundSphere => {
            let h = 0.5 * m.grid_spacing(n_x);
            let x = p.x;
            let xi = p.xi;
            let e2 = cross(x, xi);
            for s in [-h, h] {
                out.push(flow(m, p, s));
                let (sn, cs) = (sin(s), cos(s));
                let nx = unit([
                    cs * x[0] + sn * e2[0],
                    cs * x[1] + sn * e2[1],
                    cs * x[2] + sn * e2[2],
                ]);
                out.push(PhasePoint { len: 3, x: nx, xi });
            }
            for s in [-half_dir, half_dir] {
                let (sn, cs) = (sin(s), cos(s));
                let nxi = unit([
                    cs * xi[0] + sn * e2[0],
                    cs * xi[1] + sn * e2[1],
                    cs * xi[2] + sn * e2[2],
                ]);
                out.push(PhasePoint { len: 3, x, xi: nxi });
            }
        }
    }
    out
}
