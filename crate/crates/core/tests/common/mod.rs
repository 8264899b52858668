#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveobs_core::linalg::{c, CMat, RMat, C64};
use waveobs_core::observability::{ObservabilityScenario, Sampling};
use waveobs_core::phase_flow::ManifoldModel;
use waveobs_core::symbols::{bump_indicator, FreqTerm, MatrixSymbol, PolyTerm, ScalarField, TimeFactor, TrigTerm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn circle() -> ManifoldModel {
    ManifoldModel::circle(2.0 * PI).unwrap()
}

pub fn uni(r: &mut ChaCha8Rng, a: f64, b: f64) -> f64 {
    r.random_range(a..b)
}

/// Random real-valued trigonometric polynomial in `x` on the circle.
pub fn trig_field(r: &mut ChaCha8Rng, degree: i32, amp: f64) -> ScalarField {
    let mut terms = vec![TrigTerm { k: [0, 0], coef: c(uni(r, -amp, amp), 0.0) }];
    for k in 1..=degree {
        let z = c(uni(r, -amp, amp), uni(r, -amp, amp)) * 0.5;
        terms.push(TrigTerm { k: [k, 0], coef: z });
        terms.push(TrigTerm { k: [-k, 0], coef: z.conj() });
    }
    ScalarField::trig(terms)
}

/// Random real trigonometric polynomial in `t` with base frequency `omega`.
pub fn time_factor(r: &mut ChaCha8Rng, degree: i32, omega: f64) -> TimeFactor {
    let mut terms = vec![FreqTerm { omega: 0.0, coef: c(uni(r, -1.0, 1.0), 0.0) }];
    for j in 1..=degree {
        let z = c(uni(r, -1.0, 1.0), uni(r, -1.0, 1.0)) * 0.5;
        terms.push(FreqTerm { omega: j as f64 * omega, coef: z });
        terms.push(FreqTerm { omega: -(j as f64) * omega, coef: z.conj() });
    }
    TimeFactor::TrigPoly(terms)
}

pub fn field_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize, amp: f64, timed: bool) -> Vec<ScalarField> {
    (0..rows * cols)
        .map(|_| {
            let f = trig_field(r, 2, amp);
            if timed {
                f.with_time(time_factor(r, 2, 1.3))
            } else {
                f
            }
        })
        .collect()
}

pub fn zeros(n: usize) -> Vec<ScalarField> {
    (0..n).map(|_| ScalarField::zero()).collect()
}

pub fn sampling(n_x: usize, n_dir: usize) -> Sampling {
    Sampling { n_x, n_dir, refine: true }
}

/// `a = 0`, `d = Id_N` on the circle.
pub fn full_observation(n: usize, n_steps: usize) -> ObservabilityScenario {
    let obs = MatrixSymbol::constant(&CMat::identity(n, n), &CMat::zeros(n, n)).unwrap();
    ObservabilityScenario::new(circle(), MatrixSymbol::zeros(n, n), obs, 4.0, sampling(16, 2), n_steps).unwrap()
}

/// Scalar wave observed on an arc of length `ell` centred at `pi`.
pub fn arc_scenario(ell: f64, n_x: usize, n_steps: usize) -> ObservabilityScenario {
    let m = circle();
    let chi = bump_indicator(&m, &[PI], 0.25 * ell, 0.5 * ell).unwrap();
    let obs = MatrixSymbol::new(&m, 1, 1, vec![chi], zeros(1)).unwrap();
    ObservabilityScenario::new(m, MatrixSymbol::zeros(1, 1), obs, 2.0 * PI + 1.0, sampling(n_x, 2), n_steps).unwrap()
}

/// Two components with time- and space-dependent coupling of both orders.
pub fn random_coupled(r: &mut ChaCha8Rng, parity: bool, n_steps: usize) -> ObservabilityScenario {
    let m = circle();
    let a0 = field_matrix(r, 2, 2, 1.0, true);
    let a1 = if parity { zeros(4) } else { field_matrix(r, 2, 2, 0.7, true) };
    let d0 = field_matrix(r, 1, 2, 1.0, false);
    let d1 = if parity { zeros(2) } else { field_matrix(r, 1, 2, 0.5, false) };
    let coupling = MatrixSymbol::new(&m, 2, 2, a0, a1).unwrap();
    let obs = MatrixSymbol::new(&m, 1, 2, d0, d1).unwrap();
    ObservabilityScenario::new(m, coupling, obs, 3.0, sampling(12, 2), n_steps).unwrap()
}

/// Scalar system on the sphere with a polynomial potential-like coupling
/// and a cap-shaped observation.
pub fn sphere_scenario(n_steps: usize) -> ObservabilityScenario {
    let m = ManifoldModel::sphere();
    let chi = bump_indicator(&m, &[0.0, 0.0, 1.0], 0.4, 0.9).unwrap();
    let a0 = ScalarField::poly(vec![
        PolyTerm { powers: [1, 0, 0], coef: c(0.5, 0.0) },
        PolyTerm { powers: [0, 1, 1], coef: c(0.0, 0.3) },
    ]);
    let coupling = MatrixSymbol::new(&m, 1, 1, vec![a0], zeros(1)).unwrap();
    let obs = MatrixSymbol::new(&m, 1, 1, vec![chi], zeros(1)).unwrap();
    ObservabilityScenario::new(m, coupling, obs, 6.0, sampling(40, 4), n_steps).unwrap()
}

pub fn real_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> RMat {
    RMat::from_fn(rows, cols, |_, _| uni(r, -1.0, 1.0))
}

pub fn orthogonal(r: &mut ChaCha8Rng, n: usize) -> RMat {
    real_matrix(r, n, n).qr().q()
}

/// A pair with an uncontrollable part of dimension `n - r0`.
pub fn uncontrollable_pair(r: &mut ChaCha8Rng, n: usize, k: usize, r0: usize) -> (RMat, RMat) {
    let mut a = real_matrix(r, n, n);
    let mut b = real_matrix(r, n, k);
    for i in r0..n {
        for j in 0..r0 {
            a[(i, j)] = 0.0;
        }
        for j in 0..k {
            b[(i, j)] = 0.0;
        }
    }
    let s = orthogonal(r, n);
    (&s * a * s.transpose(), &s * b)
}

pub fn cplx(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}
