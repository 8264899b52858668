//! Ray Gramians, the observability constant and the critical time.
//!
//! For a ray `rho0` and branch `+` or `-` the transported system is
//!
//! ```text
//! X' = a_b(t, phi_{-+t} rho0)* X / 2 + d_b(t, phi_{-+t} rho0)* u / 2
//! ```
//!
//! where `a_b`, `d_b` are the combined coupling and observation symbols and
//! the `+` branch follows the flow backwards. `kappa(T)` is the smallest
//! Gramian eigenvalue over a sampled set of rays and both branches.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{simpson_weights, CMat, Positivity, C64, POSITIVE_REL};
use crate::ltv_control::{gramian, Gramian, RaySystem};
use crate::phase_flow::{flow, involution, refine_around, sample_cosphere, Branch, ManifoldModel, PhasePoint};
use crate::symbols::{lift_zero_order, MatrixSymbol, ZeroOrderCoupling};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub n_x: usize,
    pub n_dir: usize,
    /// Add one pass of points at half spacing around the worst ray.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityScenario {
    pub manifold: ManifoldModel,
    pub n: usize,
    pub k: usize,
    /// `n x n`.
    pub coupling: MatrixSymbol,
    /// `k x n`.
    pub observation: MatrixSymbol,
    pub t_max: f64,
    pub sampling: Sampling,
    pub n_steps: usize,
}

impl ObservabilityScenario {
    pub fn new(
        manifold: ManifoldModel,
        coupling: MatrixSymbol,
        observation: MatrixSymbol,
        t_max: f64,
        sampling: Sampling,
        n_steps: usize,
    ) -> Result<Self> {
        let n = coupling.rows();
        let k = observation.rows();
        if coupling.cols() != n || observation.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "coupling {}x{}, observation {}x{}",
                coupling.rows(),
                coupling.cols(),
                observation.rows(),
                observation.cols()
            )));
        }
        if n == 0 || k == 0 {
            return Err(Error::DimensionMismatch("empty system".into()));
        }
        if sampling.n_x == 0 || sampling.n_dir == 0 {
            return Err(Error::InvalidSampling(format!(
                "n_x = {}, n_dir = {}",
                sampling.n_x, sampling.n_dir
            )));
        }
        Ok(ObservabilityScenario { manifold, n, k, coupling, observation, t_max, sampling, n_steps })
    }

    pub fn from_zero_order(
        manifold: ManifoldModel,
        z: &ZeroOrderCoupling,
        t_max: f64,
        sampling: Sampling,
        n_steps: usize,
    ) -> Result<Self> {
        let (a, d) = lift_zero_order(&manifold, z)?;
        Self::new(manifold, a, d, t_max, sampling, n_steps)
    }

    /// Whether the `+` branch at `(x, -xi)` equals the `-` branch at `(x, xi)`.
    pub fn parity(&self) -> bool {
        self.coupling.parity_flag() && self.observation.parity_flag()
    }

    pub fn sample(&self) -> Result<Vec<PhasePoint>> {
        sample_cosphere(&self.manifold, self.sampling.n_x, self.sampling.n_dir)
    }
}

/// Point on the ray at time `t` for the given branch.
pub fn ray_point(m: &ManifoldModel, rho0: &PhasePoint, branch: Branch, t: f64) -> PhasePoint {
    flow(m, rho0, -branch.sign() * t)
}

/// The transported control system of one ray and branch on `[0, horizon]`.
pub fn ray_system<'a>(
    sc: &'a ObservabilityScenario,
    rho0: PhasePoint,
    branch: Branch,
    horizon: f64,
) -> RaySystem<'a> {
    let half = C64::from(0.5);
    let m = &sc.manifold;
    let drift = move |t: f64| -> Result<CMat> {
        let p = ray_point(m, &rho0, branch, t);
        Ok(sc.coupling.eval_combined(m, branch, t, &p)?.adjoint() * half)
    };
    let control = move |t: f64| -> Result<CMat> {
        let p = ray_point(m, &rho0, branch, t);
        Ok(sc.observation.eval_combined(m, branch, t, &p)?.adjoint() * half)
    };
    RaySystem::new(sc.n, sc.k, horizon, Box::new(drift), Box::new(control)).with_origin(rho0, branch)
}

pub fn branch_gramian(
    sc: &ObservabilityScenario,
    rho0: &PhasePoint,
    branch: Branch,
    horizon: f64,
) -> Result<Gramian> {
    sc.manifold.validate(rho0)?;
    gramian(&ray_system(sc, *rho0, branch, horizon), sc.n_steps)
}

/// Solution of `dR/dtau = R b(tau, phi_{+-(t - tau)} rho)`, `R(t, t) = I`,
/// with `b = a_branch / 2`, integrated from `t` to `tau` by RK4.
///
/// This is the resolvent written directly in terms of the symbol, without
/// building the ray system; it serves as an independent route.
pub fn transport_resolvent(
    sc: &ObservabilityScenario,
    rho: &PhasePoint,
    branch: Branch,
    tau: f64,
    t: f64,
    n_steps: usize,
) -> Result<CMat> {
    if n_steps == 0 {
        return Err(Error::BadGrid("zero steps".into()));
    }
    let m = &sc.manifold;
    let b = |s: f64| -> Result<CMat> {
        let p = flow(m, rho, branch.sign() * (t - s));
        Ok(sc.coupling.eval_combined(m, branch, s, &p)? * C64::from(0.5))
    };
    let h = (tau - t) / n_steps as f64;
    let mut r = CMat::identity(sc.n, sc.n);
    let mut b0 = b(t)?;
    for j in 0..n_steps {
        let s = t + j as f64 * h;
        let bm = b(s + 0.5 * h)?;
        let b1 = b(s + h)?;
        let k1 = &r * &b0;
        let k2 = (&r + &k1 * C64::from(0.5 * h)) * &bm;
        let k3 = (&r + &k2 * C64::from(0.5 * h)) * &bm;
        let k4 = (&r + &k3 * C64::from(h)) * &b1;
        r += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        b0 = b1;
    }
    Ok(r)
}

/// Gramian assembled from transport resolvents:
/// `1/4 int_0^T R(0,t)* d* d R(0,t) dt` with everything taken at
/// `phi_{-+t} rho0`. Costs `O(n_steps^2)` symbol evaluations.
pub fn symbol_gramian(
    sc: &ObservabilityScenario,
    rho0: &PhasePoint,
    branch: Branch,
    horizon: f64,
    n_steps: usize,
) -> Result<Gramian> {
    if n_steps < 2 || !n_steps.is_multiple_of(2) {
        return Err(Error::BadGrid(format!("need an even step count, got {n_steps}")));
    }
    let h = horizon / n_steps as f64;
    let w = simpson_weights(n_steps, h);
    let m = &sc.manifold;
    let mut acc = CMat::zeros(sc.n, sc.n);
    for (j, wj) in w.iter().enumerate() {
        let t = j as f64 * h;
        let p = ray_point(m, rho0, branch, t);
        let r = transport_resolvent(sc, &p, branch, 0.0, t, j.max(1))?;
        let d = sc.observation.eval_combined(m, branch, t, &p)?;
        let dr = d * r;
        acc += (dr.adjoint() * dr) * C64::from(0.25 * wj);
    }
    Ok(Gramian::from_matrix(acc))
}

/// One unit of work in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Job {
    pub point: PhasePoint,
    pub branch: Branch,
}

/// Evaluates sweep jobs, possibly concurrently. Results must come back in
/// job order.
pub trait SweepExecutor {
    fn run(&self, jobs: &[Job], f: &(dyn Fn(&Job) -> Result<Gramian> + Sync)) -> Vec<Result<Gramian>>;
}

/// Runs jobs one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl SweepExecutor for Sequential {
    fn run(&self, jobs: &[Job], f: &(dyn Fn(&Job) -> Result<Gramian> + Sync)) -> Vec<Result<Gramian>> {
        jobs.iter().map(f).collect()
    }
}

/// Where a row of the per-point table came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Computed,
    /// Taken from the `-` branch at the involuted point.
    Mirrored,
    Refined,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub point: PhasePoint,
    pub branch: Branch,
    pub min_eig: f64,
    pub norm: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone)]
pub struct ObsReport {
    pub horizon: f64,
    /// Smallest eigenvalue found, clamped at zero.
    pub kappa: f64,
    /// Smallest eigenvalue before clamping.
    pub raw_min_eig: f64,
    /// `1 / (2 kappa)`, infinite when `kappa = 0`.
    pub c_obs: f64,
    pub worst_point: PhasePoint,
    pub worst_branch: Branch,
    pub worst_eigvec: DVector<C64>,
    /// Largest Gramian norm in the sweep; positivity is judged against it.
    pub scale: f64,
    pub verdict: Positivity,
    pub mirrored: bool,
    pub per_point: Vec<PointResult>,
}

fn same_point(a: &PhasePoint, b: &PhasePoint) -> bool {
    a.x().iter().zip(b.x()).all(|(u, v)| (u - v).abs() < 1e-12)
        && a.xi().iter().zip(b.xi()).all(|(u, v)| (u - v).abs() < 1e-12)
}

struct Sweep {
    rows: Vec<PointResult>,
    worst: usize,
    worst_vec: DVector<C64>,
}

fn run_jobs(
    sc: &ObservabilityScenario,
    horizon: f64,
    jobs: &[Job],
    exec: &dyn SweepExecutor,
) -> Result<Vec<Gramian>> {
    let f = |j: &Job| branch_gramian(sc, &j.point, j.branch, horizon);
    exec.run(jobs, &f).into_iter().collect()
}

fn sweep(
    sc: &ObservabilityScenario,
    horizon: f64,
    points: &[PhasePoint],
    mirror: bool,
    exec: &dyn SweepExecutor,
) -> Result<Sweep> {
    let mut jobs: Vec<Job> = points.iter().map(|&p| Job { point: p, branch: Branch::Minus }).collect();
    // Row index -> job index, plus whether the row is mirrored.
    let mut plan: Vec<(PhasePoint, Branch, usize, Origin)> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, Branch::Minus, i, Origin::Computed))
        .collect();
    for &p in points {
        if mirror {
            let s = involution(&p);
            let idx = match points.iter().position(|q| same_point(q, &s)) {
                Some(i) => i,
                None => {
                    jobs.push(Job { point: s, branch: Branch::Minus });
                    jobs.len() - 1
                }
            };
            plan.push((p, Branch::Plus, idx, Origin::Mirrored));
        } else {
            jobs.push(Job { point: p, branch: Branch::Plus });
            plan.push((p, Branch::Plus, jobs.len() - 1, Origin::Computed));
        }
    }
    let grams = run_jobs(sc, horizon, &jobs, exec)?;
    let mut rows = Vec::with_capacity(plan.len());
    let mut worst = 0;
    for (r, (p, b, idx, origin)) in plan.into_iter().enumerate() {
        let g = &grams[idx];
        rows.push(PointResult { point: p, branch: b, min_eig: g.min_eig, norm: g.norm, origin });
        if g.min_eig < rows[worst].min_eig {
            worst = r;
        }
    }
    let worst_job = match rows[worst].origin {
        Origin::Computed | Origin::Refined => {
            let want = Job { point: rows[worst].point, branch: rows[worst].branch };
            jobs.iter().position(|j| *j == want).unwrap_or(0)
        }
        Origin::Mirrored => {
            let s = involution(&rows[worst].point);
            jobs.iter().position(|j| same_point(&j.point, &s)).unwrap_or(0)
        }
    };
    Ok(Sweep { rows, worst, worst_vec: grams[worst_job].min_eigvec.clone() })
}

/// `kappa(T)` over the scenario sample, evaluated sequentially.
pub fn kappa(sc: &ObservabilityScenario, horizon: f64) -> Result<ObsReport> {
    kappa_with(sc, horizon, &Sequential)
}

pub fn kappa_with(sc: &ObservabilityScenario, horizon: f64, exec: &dyn SweepExecutor) -> Result<ObsReport> {
    let points = sc.sample()?;
    let mirror = sc.parity();
    let mut sw = sweep(sc, horizon, &points, mirror, exec)?;
    if sc.sampling.refine {
        let w = sw.rows[sw.worst].clone();
        let extra = refine_around(&sc.manifold, &w.point, sc.sampling.n_x, sc.sampling.n_dir);
        let jobs: Vec<Job> = extra.iter().map(|&p| Job { point: p, branch: w.branch }).collect();
        let grams = run_jobs(sc, horizon, &jobs, exec)?;
        for (j, g) in jobs.iter().zip(grams) {
            sw.rows.push(PointResult {
                point: j.point,
                branch: j.branch,
                min_eig: g.min_eig,
                norm: g.norm,
                origin: Origin::Refined,
            });
            if g.min_eig < sw.rows[sw.worst].min_eig {
                sw.worst = sw.rows.len() - 1;
                sw.worst_vec = g.min_eigvec.clone();
            }
        }
    }
    let scale = sw.rows.iter().fold(0.0, |a: f64, r| a.max(r.norm));
    let raw = sw.rows[sw.worst].min_eig;
    let kappa = raw.max(0.0);
    let c_obs = if kappa > 0.0 { 1.0 / (2.0 * kappa) } else { f64::INFINITY };
    Ok(ObsReport {
        horizon,
        kappa,
        raw_min_eig: raw,
        c_obs,
        worst_point: sw.rows[sw.worst].point,
        worst_branch: sw.rows[sw.worst].branch,
        worst_eigvec: sw.worst_vec,
        scale,
        verdict: Positivity::classify(raw, scale),
        mirrored: mirror,
        per_point: sw.rows,
    })
}

/// `C_obs^2 = 1 / (2 kappa(T))`.
pub fn obs_constant(sc: &ObservabilityScenario, horizon: f64) -> Result<f64> {
    Ok(kappa(sc, horizon)?.c_obs)
}

/// Positivity of the sweep over the fixed sample (no refinement).
pub fn sample_is_positive(
    sc: &ObservabilityScenario,
    horizon: f64,
    exec: &dyn SweepExecutor,
) -> Result<bool> {
    let points = sc.sample()?;
    let sw = sweep(sc, horizon, &points, sc.parity(), exec)?;
    let scale = sw.rows.iter().fold(0.0, |a: f64, r| a.max(r.norm));
    Ok(scale > 0.0 && sw.rows[sw.worst].min_eig > POSITIVE_REL * scale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalTime {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// The predicate already held at the lower end of the search interval.
    pub at_lower_edge: bool,
}

/// Smallest horizon for which every sampled ray has a positive Gramian,
/// located by bisection to within `tol`.
pub fn t_crit(sc: &ObservabilityScenario, t_lo: f64, t_hi: f64, tol: f64) -> Result<CriticalTime> {
    t_crit_with(sc, t_lo, t_hi, tol, &Sequential)
}

pub fn t_crit_with(
    sc: &ObservabilityScenario,
    t_lo: f64,
    t_hi: f64,
    tol: f64,
    exec: &dyn SweepExecutor,
) -> Result<CriticalTime> {
    if !(t_lo > 0.0 && t_hi > t_lo && tol > 0.0 && t_hi.is_finite()) {
        return Err(Error::BadGrid(format!("bracket [{t_lo}, {t_hi}] with tol {tol}")));
    }
    if !sample_is_positive(sc, t_hi, exec)? {
        return Err(Error::NotFound { t_hi });
    }
    if sample_is_positive(sc, t_lo, exec)? {
        return Ok(CriticalTime { value: t_lo, lo: t_lo, hi: t_lo, at_lower_edge: true });
    }
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sample_is_positive(sc, mid, exec)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalTime { value: 0.5 * (lo + hi), lo, hi, at_lower_edge: false })
}
