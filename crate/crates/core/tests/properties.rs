mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;
use waveobs_core::linalg::{c, hermitian_eigen, CMat, RMat, C64};
use waveobs_core::ltv_control::{gramian, hautus_check, kalman_rank, RaySystem};
use waveobs_core::normal_forms::{multilevel_space, split_sub_r};
use waveobs_core::phase_flow::{flow, involution, ManifoldModel, PhasePoint};
use waveobs_core::spectral::{halfwave, halfwave_inverse, SpectralState};

use common::cplx;

fn real_mat(n: usize, m: usize) -> impl Strategy<Value = RMat> {
    prop::collection::vec(-1.0f64..1.0, n * m).prop_map(move |v| RMat::from_row_slice(n, m, &v))
}

fn pair() -> impl Strategy<Value = (RMat, RMat)> {
    (1usize..=4, 1usize..=2).prop_flat_map(|(n, k)| (real_mat(n, n), real_mat(n, k)))
}

fn sphere_point() -> impl Strategy<Value = PhasePoint> {
    (-1.0f64..1.0, 0.0f64..2.0 * PI, 0.0f64..2.0 * PI).prop_map(|(z, phi, th)| {
        let r = (1.0 - z * z).sqrt();
        let x = [r * phi.cos(), r * phi.sin(), z];
        let a = if z.abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
        let d = a[0] * x[0] + a[1] * x[1] + a[2] * x[2];
        let mut e1 = [a[0] - d * x[0], a[1] - d * x[1], a[2] - d * x[2]];
        let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
        e1.iter_mut().for_each(|v| *v /= n1);
        let e2 = [x[1] * e1[2] - x[2] * e1[1], x[2] * e1[0] - x[0] * e1[2], x[0] * e1[1] - x[1] * e1[0]];
        let xi = [0, 1, 2].map(|i| th.cos() * e1[i] + th.sin() * e2[i]);
        PhasePoint::new(&x, &xi).unwrap()
    })
}

fn frozen(a: &RMat, b: &RMat, horizon: f64, n_steps: usize) -> waveobs_core::ltv_control::Gramian {
    let (ac, bc) = (cplx(a), cplx(b));
    let sys = RaySystem::new(a.nrows(), b.ncols(), horizon, Box::new(move |_| Ok(ac.clone())), Box::new(move |_| Ok(bc.clone())));
    gramian(&sys, n_steps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torus_flow_group_law(x in 0.0f64..2.0*PI, y in 0.0f64..3.0, th in 0.0f64..2.0*PI, s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let m = ManifoldModel::torus(&[2.0 * PI, 3.0]).unwrap();
        let p = PhasePoint::new(&[x, y], &[th.cos(), th.sin()]).unwrap();
        let a = flow(&m, &flow(&m, &p, s), t);
        let b = flow(&m, &p, s + t);
        prop_assert!(m.distance(a.x(), b.x()) < 1e-10);
        prop_assert_eq!(a.xi(), b.xi());
    }

    #[test]
    fn sphere_flow_group_law_and_unit_speed(p in sphere_point(), s in -4.0f64..4.0, t in -4.0f64..4.0) {
        let m = ManifoldModel::sphere();
        let a = flow(&m, &flow(&m, &p, s), t);
        let b = flow(&m, &p, s + t);
        for i in 0..3 {
            prop_assert!((a.x()[i] - b.x()[i]).abs() < 1e-12);
            prop_assert!((a.xi()[i] - b.xi()[i]).abs() < 1e-12);
        }
        prop_assert!(m.validate(&a).is_ok());
    }

    #[test]
    fn involution_reverses_flow(p in sphere_point(), t in -4.0f64..4.0) {
        let m = ManifoldModel::sphere();
        prop_assert_eq!(involution(&involution(&p)), p);
        let a = involution(&flow(&m, &p, t));
        let b = flow(&m, &involution(&p), -t);
        for i in 0..3 {
            prop_assert!((a.x()[i] - b.x()[i]).abs() < 1e-12);
            prop_assert!((a.xi()[i] - b.xi()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn gramian_is_hermitian_psd((a, b) in pair(), t in 0.2f64..2.0) {
        let g = frozen(&a, &b, t, 64);
        let h = (&g.matrix - g.matrix.adjoint()).norm();
        prop_assert!(h <= 1e-12 * g.norm.max(1.0));
        prop_assert!(g.min_eig >= -1e-10 * g.norm);
    }

    #[test]
    fn gramian_monotone_in_horizon((a, b) in pair(), t1 in 0.2f64..1.5, dt in 0.0f64..1.5) {
        let g1 = frozen(&a, &b, t1, 128);
        let g2 = frozen(&a, &b, t1 + dt, 128);
        let diff = &g2.matrix - &g1.matrix;
        let ev = hermitian_eigen(&diff).0;
        prop_assert!(ev[0] >= -1e-10 * g2.norm.max(1.0));
    }

    #[test]
    fn kalman_and_hautus_agree((a, b) in pair()) {
        let k = kalman_rank(&a, &b).unwrap();
        let sv = &k.singular_values;
        // Near rank-deficient draws are ambiguous for any finite tolerance.
        prop_assume!(sv.last().unwrap() / sv[0] > 1e-6 || !k.controllable);
        prop_assert_eq!(hautus_check(&a, &b).unwrap().controllable, k.controllable);
    }

    #[test]
    fn halfwave_roundtrip(seed in prop::collection::vec(-1.0f64..1.0, 4 * 2 * 17)) {
        let mut s = SpectralState::zeros(2, 8);
        let w = s.v.len();
        for i in 0..w {
            s.v[i] = c(seed[4 * i], seed[4 * i + 1]);
            s.w[i] = c(seed[4 * i + 2], seed[4 * i + 3]);
        }
        let (p, m) = halfwave(&s);
        let back = halfwave_inverse(2, 8, &p, &m);
        let err = s.v.iter().zip(&back.v).chain(s.w.iter().zip(&back.w)).fold(0.0f64, |e, (x, y)| e.max((x - y).norm()));
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn split_sub_r_sums_back(blocks in prop::collection::vec(1usize..=3, 1..=3), v in prop::collection::vec(-1.0f64..1.0, 81)) {
        let n: usize = blocks.iter().sum();
        let a = RMat::from_fn(n, n, |i, j| v[i * 9 + j]);
        let (sub, rest) = split_sub_r(&a, &blocks).unwrap();
        prop_assert!((&sub + &rest - &a).norm() == 0.0);
        let levels = multilevel_space(&blocks, 0.5);
        prop_assert_eq!(levels.len(), n);
        for i in 0..n {
            for j in 0..n {
                if sub[(i, j)] != 0.0 {
                    prop_assert!((levels[i] - levels[j] - 1.0).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn gramian_of_identity_pair_is_horizon_times_identity() {
    let a = RMat::zeros(2, 2);
    let b = RMat::identity(2, 2);
    let g = frozen(&a, &b, 1.7, 16);
    let want: CMat = DMatrix::from_diagonal_element(2, 2, C64::new(1.7, 0.0));
    assert!((g.matrix - want).norm() < 1e-14);
}
