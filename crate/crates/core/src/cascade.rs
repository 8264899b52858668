//! Two-component cascades `u -> v` observed through `u` only.
//!
//! Along a ray the pair `(alpha, beta)` gives the system
//!
//! ```text
//! X' = -beta(t)/2 [[0, 0], [1, 0]] X + alpha(t)/2 [1, 0]^T u
//! ```
//!
//! whose Gramian is positive exactly when there are `t1 < t2` with
//! `alpha(t1) != 0`, `alpha(t2) != 0` and `int_{t1}^{t2} beta != 0`.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{Positivity, CMat, C64};
use crate::ltv_control::{gramian, Gramian, RaySystem};
use crate::phase_flow::{flow, sample_cosphere, ManifoldModel, PhasePoint};
use crate::symbols::ScalarField;

/// Relative threshold for "nonzero" on a sampled grid.
pub const NONZERO_REL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadePair {
    pub manifold: ManifoldModel,
    pub alpha: ScalarField,
    pub beta: ScalarField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeCondition {
    pub holds: bool,
    /// First grid pair `(t1, t2)` in lexicographic order that works.
    pub witness: Option<(f64, f64)>,
    /// Largest over grid pairs of the smallest normalised factor.
    pub strength: f64,
    /// The strength sits within three decades of the threshold.
    pub indeterminate: bool,
}

/// Values of `alpha`, `beta` along the ray and the running integral of `beta`.
#[derive(Debug, Clone)]
pub struct RayProfile {
    pub times: Vec<f64>,
    pub alpha: Vec<C64>,
    pub beta: Vec<C64>,
    /// `int_0^{t_j} beta`, Simpson on each cell with a midpoint sample.
    pub beta_integral: Vec<C64>,
}

pub fn ray_profile(pair: &CascadePair, rho0: &PhasePoint, horizon: f64, grid_n: usize) -> Result<RayProfile> {
    if grid_n == 0 || !(horizon > 0.0) {
        return Err(Error::BadGrid("cascade grid needs n > 0 and T > 0".into()));
    }
    pair.manifold.validate(rho0)?;
    let m = &pair.manifold;
    let h = horizon / grid_n as f64;
    let at = |f: &ScalarField, t: f64| f.eval(m, t, flow(m, rho0, t).x());
    let times: Vec<f64> = (0..=grid_n).map(|j| j as f64 * h).collect();
    let alpha: Vec<C64> = times.iter().map(|&t| at(&pair.alpha, t)).collect();
    let beta: Vec<C64> = times.iter().map(|&t| at(&pair.beta, t)).collect();
    let mut beta_integral = Vec::with_capacity(grid_n + 1);
    let mut acc = C64::new(0.0, 0.0);
    beta_integral.push(acc);
    for j in 0..grid_n {
        let mid = at(&pair.beta, times[j] + 0.5 * h);
        acc += (beta[j] + mid * 4.0 + beta[j + 1]) * (h / 6.0);
        beta_integral.push(acc);
    }
    if alpha.iter().chain(&beta).any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFiniteSymbol { t: horizon });
    }
    Ok(RayProfile { times, alpha, beta, beta_integral })
}

fn sup(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |a: f64, z| a.max(z.norm()))
}

pub fn cascade_condition(pair: &CascadePair, rho0: &PhasePoint, horizon: f64, grid_n: usize) -> Result<CascadeCondition> {
    let p = ray_profile(pair, rho0, horizon, grid_n)?;
    Ok(condition_from_profile(&p))
}

pub fn condition_from_profile(p: &RayProfile) -> CascadeCondition {
    let sa = sup(&p.alpha);
    let sb = sup(&p.beta);
    if !(sa > 0.0 && sb > 0.0) {
        return CascadeCondition { holds: false, witness: None, strength: 0.0, indeterminate: false };
    }
    let n = p.times.len();
    let mut strength: f64 = 0.0;
    let mut witness = None;
    for i in 0..n {
        let a1 = p.alpha[i].norm() / sa;
        if a1 <= strength && witness.is_some() {
            continue;
        }
        for j in i + 1..n {
            let a2 = p.alpha[j].norm() / sa;
            let di = (p.beta_integral[j] - p.beta_integral[i]).norm() / sb;
            let s = a1.min(a2).min(di);
            if s > NONZERO_REL && witness.is_none() {
                witness = Some((p.times[i], p.times[j]));
            }
            strength = strength.max(s);
        }
    }
    CascadeCondition {
        holds: strength > NONZERO_REL,
        witness,
        strength,
        indeterminate: strength > NONZERO_REL * 1e-3 && strength < NONZERO_REL * 1e3,
    }
}

/// The cascade ray system along `phi_t(rho0)`.
pub fn cascade_system<'a>(pair: &'a CascadePair, rho0: PhasePoint, horizon: f64) -> RaySystem<'a> {
    let m = &pair.manifold;
    let drift = move |t: f64| -> Result<CMat> {
        let b = pair.beta.eval(m, t, flow(m, &rho0, t).x());
        let mut d = CMat::zeros(2, 2);
        d[(1, 0)] = -b * 0.5;
        Ok(d)
    };
    let control = move |t: f64| -> Result<CMat> {
        let a = pair.alpha.eval(m, t, flow(m, &rho0, t).x());
        let mut c = CMat::zeros(2, 1);
        c[(0, 0)] = a * 0.5;
        Ok(c)
    };
    RaySystem::new(2, 1, horizon, Box::new(drift), Box::new(control))
}

#[derive(Debug, Clone)]
pub struct CascadeEquivalence {
    pub condition: CascadeCondition,
    pub gramian: Gramian,
    pub gramian_positive: bool,
    pub agree: bool,
    pub indeterminate: bool,
    /// When `beta` keeps one sign on the grid: whether some
    /// `t1 < t2 < t3` has `alpha(t1) beta(t2) alpha(t3) != 0`.
    pub sign_variant: Option<bool>,
}

pub fn cascade_gramian_equiv(
    pair: &CascadePair,
    rho0: &PhasePoint,
    horizon: f64,
    grid_n: usize,
    n_steps: usize,
) -> Result<CascadeEquivalence> {
    let profile = ray_profile(pair, rho0, horizon, grid_n)?;
    let condition = condition_from_profile(&profile);
    let g = gramian(&cascade_system(pair, *rho0, horizon), n_steps)?;
    let gramian_positive = g.verdict == Positivity::Positive;
    let sa = sup(&profile.alpha) * NONZERO_REL;
    let sb = sup(&profile.beta) * NONZERO_REL;
    let one_sign = {
        let pos = profile.beta.iter().any(|b| b.re > sb);
        let neg = profile.beta.iter().any(|b| b.re < -sb);
        let cplx = profile.beta.iter().any(|b| b.im.abs() > sb);
        !(cplx || (pos && neg))
    };
    let sign_variant = one_sign.then(|| {
        let mut stage = 0;
        for (a, b) in profile.alpha.iter().zip(&profile.beta) {
            stage = match stage {
                0 if a.norm() > sa && sa > 0.0 => 1,
                1 if b.norm() > sb && sb > 0.0 => 2,
                2 if a.norm() > sa => 3,
                s => s,
            };
        }
        stage == 3
    });
    Ok(CascadeEquivalence {
        agree: condition.holds == gramian_positive,
        indeterminate: condition.indeterminate || g.verdict == Positivity::Indeterminate,
        condition,
        gramian_positive,
        gramian: g,
        sign_variant,
    })
}

#[derive(Debug, Clone)]
pub struct OmegaOOmega {
    /// Largest first-completion time over the sample.
    pub value: f64,
    pub worst_point: PhasePoint,
    pub per_point: Vec<f64>,
}

/// Smallest `T` such that every sampled ray meets `{alpha != 0}`, then
/// `{beta != 0}`, then `{alpha != 0}` again before `T`.
///
/// Rays are scanned with step `scan_dt` and each entry time is refined by
/// bisection to `tol`. Both fields must be time independent.
#[allow(clippy::too_many_arguments)]
pub fn t_omega_o_omega(
    m: &ManifoldModel,
    alpha: &ScalarField,
    beta: &ScalarField,
    n_x: usize,
    n_dir: usize,
    t_max: f64,
    scan_dt: f64,
    tol: f64,
) -> Result<OmegaOOmega> {
    if !(alpha.is_time_independent() && beta.is_time_independent()) {
        return Err(Error::NotSupported("time-dependent fields in the region criterion".into()));
    }
    if !(scan_dt > 0.0 && tol > 0.0 && t_max > 0.0) {
        return Err(Error::BadGrid("scan step, tolerance and horizon must be positive".into()));
    }
    let fine = match m {
        ManifoldModel::FlatTorus { periods } if periods.len() == 1 => 1024,
        ManifoldModel::FlatTorus { .. } => 64,
        ManifoldModel::RoundSphere => 4096,
    };
    let grid = sample_cosphere(m, fine, 1)?;
    let sup_of = |f: &ScalarField| grid.iter().fold(0.0, |a: f64, p| a.max(f.eval(m, 0.0, p.x()).norm()));
    let (ta, tb) = (NONZERO_REL * sup_of(alpha), NONZERO_REL * sup_of(beta));
    if !(ta > 0.0 && tb > 0.0) {
        return Err(Error::NotFound { t_hi: t_max });
    }
    let points = sample_cosphere(m, n_x, n_dir)?;
    let n_scan = libm::ceil(t_max / scan_dt) as usize;
    let mut per_point = Vec::with_capacity(points.len());
    for rho in &points {
        let on_a = |t: f64| alpha.eval(m, 0.0, flow(m, rho, t).x()).norm() > ta;
        let on_b = |t: f64| beta.eval(m, 0.0, flow(m, rho, t).x()).norm() > tb;
        let next_entry = |on: &dyn Fn(f64) -> bool, from: f64| -> Option<f64> {
            if on(from) {
                return Some(from);
            }
            let j0 = libm::floor(from / scan_dt) as usize + 1;
            let mut prev = from;
            for j in j0..=n_scan {
                let t = j as f64 * scan_dt;
                if on(t) {
                    let (mut lo, mut hi) = (prev, t);
                    while hi - lo > tol {
                        let mid = 0.5 * (lo + hi);
                        if on(mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    return Some(0.5 * (lo + hi));
                }
                prev = t;
            }
            None
        };
        let t = next_entry(&on_a, 0.0)
            .and_then(|e1| next_entry(&on_b, e1))
            .and_then(|e2| next_entry(&on_a, e2))
            .ok_or(Error::NotFound { t_hi: t_max })?;
        per_point.push(t);
    }
    let (worst, value) = per_point
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    Ok(OmegaOOmega { value, worst_point: points[worst], per_point })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::symbols::{bump_indicator, FreqTerm, TimeFactor};
    use core::f64::consts::PI;

    fn circle() -> ManifoldModel {
        ManifoldModel::circle(2.0 * PI).unwrap()
    }

    fn origin() -> PhasePoint {
        PhasePoint::new(&[0.0], &[1.0]).unwrap()
    }

    #[test]
    fn constant_pair_closed_form() {
        let pair = CascadePair { manifold: circle(), alpha: ScalarField::real(1.0), beta: ScalarField::real(1.0) };
        let cond = cascade_condition(&pair, &origin(), 1.0, 16).unwrap();
        assert!(cond.holds);
        assert_eq!(cond.witness, Some((0.0, 1.0 / 16.0)));
        let eq = cascade_gramian_equiv(&pair, &origin(), 1.0, 16, 64).unwrap();
        let want = [0.25, 0.0625, 0.0625, 1.0 / 48.0];
        for (i, w) in want.iter().enumerate() {
            assert!((eq.gramian.matrix[(i / 2, i % 2)].re - w).abs() < 1e-14);
        }
        assert!(eq.agree && eq.gramian_positive);
        assert_eq!(eq.sign_variant, Some(true));
    }

    #[test]
    fn zero_beta_fails_both_ways() {
        let pair = CascadePair { manifold: circle(), alpha: ScalarField::real(1.0), beta: ScalarField::zero() };
        let eq = cascade_gramian_equiv(&pair, &origin(), 1.0, 16, 64).unwrap();
        assert!(!eq.condition.holds && !eq.gramian_positive && eq.agree);
    }

    #[test]
    fn oscillating_beta_integral() {
        let beta = ScalarField::real(1.0).with_time(TimeFactor::TrigPoly(alloc::vec![
            FreqTerm { omega: 2.0 * PI, coef: c(0.0, -0.5) },
            FreqTerm { omega: -2.0 * PI, coef: c(0.0, 0.5) },
        ]));
        let pair = CascadePair { manifold: circle(), alpha: ScalarField::real(1.0), beta };
        let p = ray_profile(&pair, &origin(), 1.0, 64).unwrap();
        assert!((p.beta_integral[32].re - 1.0 / PI).abs() < 1e-7);
        assert!(condition_from_profile(&p).holds);
    }

    #[test]
    fn single_visit_is_not_enough() {
        let m = circle();
        let alpha = bump_indicator(&m, &[1.0], 0.1, 0.3).unwrap();
        let beta = bump_indicator(&m, &[4.0], 0.1, 0.3).unwrap();
        let pair = CascadePair { manifold: m, alpha, beta };
        let eq = cascade_gramian_equiv(&pair, &origin(), 2.0, 256, 512).unwrap();
        assert!(!eq.condition.holds && !eq.gramian_positive);
        let eq = cascade_gramian_equiv(&pair, &origin(), 9.0, 1024, 2048).unwrap();
        assert!(eq.condition.holds && eq.gramian_positive);
    }
}
