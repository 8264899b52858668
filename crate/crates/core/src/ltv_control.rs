//! Linear time-varying systems `X' = D(t) X + C(t) u` on `[0, T]`.
//!
//! Resolvents are integrated with classical fixed-step RK4 and Gramians with
//! composite Simpson quadrature on the same grid.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    all_finite, hermitian_eigen, rank_from_singular_values, simpson_weights, singular_values,
    CMat, Positivity, C64, RANK_REL,
};
use crate::phase_flow::{Branch, PhasePoint};

pub type MatrixFn<'a> = Box<dyn Fn(f64) -> Result<CMat> + 'a>;

/// Minimum number of RK4 steps accepted.
pub const MIN_STEPS: usize = 8;

/// A time-varying pair `(D(t), C(t))` with `D` of size `n x n` and `C` of size `n x k`.
pub struct RaySystem<'a> {
    pub n: usize,
    pub k: usize,
    pub horizon: f64,
    /// Ray the system was built from, if any.
    pub origin: Option<PhasePoint>,
    pub branch: Option<Branch>,
    drift: MatrixFn<'a>,
    control: MatrixFn<'a>,
}

impl<'a> RaySystem<'a> {
    pub fn new(n: usize, k: usize, horizon: f64, drift: MatrixFn<'a>, control: MatrixFn<'a>) -> Self {
        RaySystem { n, k, horizon, origin: None, branch: None, drift, control }
    }

    pub fn with_origin(mut self, origin: PhasePoint, branch: Branch) -> Self {
        self.origin = Some(origin);
        self.branch = Some(branch);
        self
    }

    pub fn drift(&self, t: f64) -> Result<CMat> {
        let d = (self.drift)(t)?;
        if d.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch(format!(
                "drift is {:?}, expected {}x{}",
                d.shape(),
                self.n,
                self.n
            )));
        }
        if !all_finite(&d) {
            return Err(Error::NonFiniteSymbol { t });
        }
        Ok(d)
    }

    pub fn control(&self, t: f64) -> Result<CMat> {
        let c = (self.control)(t)?;
        if c.shape() != (self.n, self.k) {
            return Err(Error::DimensionMismatch(format!(
                "control is {:?}, expected {}x{}",
                c.shape(),
                self.n,
                self.k
            )));
        }
        if !all_finite(&c) {
            return Err(Error::NonFiniteSymbol { t });
        }
        Ok(c)
    }
}

fn check_grid(horizon: f64, n_steps: usize) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::BadGrid(format!("horizon {horizon}")));
    }
    if n_steps < MIN_STEPS {
        return Err(Error::BadGrid(format!("{n_steps} steps, need at least {MIN_STEPS}")));
    }
    Ok(())
}

/// Solution operator `R(t1, t0)` of `X' = D(t) X`, integrated directly from
/// `t0` to `t1` (either direction) with `n_steps` RK4 steps.
pub fn propagate(sys: &RaySystem<'_>, t0: f64, t1: f64, n_steps: usize) -> Result<CMat> {
    if n_steps == 0 {
        return Err(Error::BadGrid("zero steps".into()));
    }
    let h = (t1 - t0) / n_steps as f64;
    let mut x = CMat::identity(sys.n, sys.n);
    let mut d0 = sys.drift(t0)?;
    for j in 0..n_steps {
        let t = t0 + j as f64 * h;
        let dm = sys.drift(t + 0.5 * h)?;
        let d1 = sys.drift(t + h)?;
        let k1 = &d0 * &x;
        let k2 = &dm * (&x + &k1 * C64::from(0.5 * h));
        let k3 = &dm * (&x + &k2 * C64::from(0.5 * h));
        let k4 = &d1 * (&x + &k3 * C64::from(h));
        x += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        d0 = d1;
    }
    Ok(x)
}

/// Resolvent values `R(t_j, 0)` on a uniform grid of `[0, T]`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    pub times: Vec<f64>,
    pub forward: Vec<CMat>,
}

impl Resolvent {
    /// `R(t_i, t_j) = R(t_i, 0) R(t_j, 0)^{-1}`.
    pub fn at(&self, i: usize, j: usize) -> Result<CMat> {
        let inv = self.forward[j]
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular resolvent".into()))?;
        Ok(&self.forward[i] * inv)
    }
}

pub fn resolvent(sys: &RaySystem<'_>, n_steps: usize) -> Result<Resolvent> {
    check_grid(sys.horizon, n_steps)?;
    let h = sys.horizon / n_steps as f64;
    let mut x = CMat::identity(sys.n, sys.n);
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut forward = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    forward.push(x.clone());
    let mut d0 = sys.drift(0.0)?;
    for j in 0..n_steps {
        let t = j as f64 * h;
        let dm = sys.drift(t + 0.5 * h)?;
        let d1 = sys.drift(t + h)?;
        let k1 = &d0 * &x;
        let k2 = &dm * (&x + &k1 * C64::from(0.5 * h));
        let k3 = &dm * (&x + &k2 * C64::from(0.5 * h));
        let k4 = &d1 * (&x + &k3 * C64::from(h));
        x += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        d0 = d1;
        times.push((j + 1) as f64 * h);
        forward.push(x.clone());
    }
    Ok(Resolvent { times, forward })
}

/// A Hermitian positive semi-definite matrix with its spectral summary.
#[derive(Debug, Clone)]
pub struct Gramian {
    pub matrix: CMat,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub min_eigvec: DVector<C64>,
    /// Spectral norm.
    pub norm: f64,
    pub verdict: Positivity,
}

impl Gramian {
    pub fn from_matrix(m: CMat) -> Self {
        let (eigenvalues, vecs) = hermitian_eigen(&m);
        let n = m.nrows();
        let min_eig = eigenvalues.first().copied().unwrap_or(0.0);
        let norm = eigenvalues.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let min_eigvec = if n > 0 { vecs.column(0).into_owned() } else { DVector::zeros(0) };
        let verdict = Positivity::classify(min_eig, norm);
        Gramian { matrix: crate::linalg::hermitian_part(&m), eigenvalues, min_eig, min_eigvec, norm, verdict }
    }
}

/// `G = int_0^T R(0,t) C(t) C(t)* R(0,t)* dt`.
///
/// `R(0, t)` is integrated directly from `d/dt R(0,t) = -R(0,t) D(t)`, so no
/// inverses are formed. `n_steps` must be even.
pub fn gramian(sys: &RaySystem<'_>, n_steps: usize) -> Result<Gramian> {
    check_grid(sys.horizon, n_steps)?;
    if !n_steps.is_multiple_of(2) {
        return Err(Error::BadGrid(format!("Simpson needs an even step count, got {n_steps}")));
    }
    let h = sys.horizon / n_steps as f64;
    let w = simpson_weights(n_steps, h);
    let mut psi = CMat::identity(sys.n, sys.n);
    let mut d0 = sys.drift(0.0)?;
    let mut acc = CMat::zeros(sys.n, sys.n);
    let add = |acc: &mut CMat, psi: &CMat, c: &CMat, w: f64| {
        let pc = psi * c;
        *acc += (&pc * pc.adjoint()) * C64::from(w);
    };
    add(&mut acc, &psi, &sys.control(0.0)?, w[0]);
    for j in 0..n_steps {
        let t = j as f64 * h;
        let dm = sys.drift(t + 0.5 * h)?;
        let d1 = sys.drift(t + h)?;
        let k1 = -(&psi * &d0);
        let k2 = -((&psi + &k1 * C64::from(0.5 * h)) * &dm);
        let k3 = -((&psi + &k2 * C64::from(0.5 * h)) * &dm);
        let k4 = -((&psi + &k3 * C64::from(h)) * &d1);
        psi += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * C64::from(h / 6.0);
        d0 = d1;
        add(&mut acc, &psi, &sys.control(t + h)?, w[j + 1]);
    }
    if !all_finite(&acc) {
        return Err(Error::Numerical("non-finite Gramian".into()));
    }
    Ok(Gramian::from_matrix(acc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanResult {
    pub rank: usize,
    pub n: usize,
    pub controllable: bool,
    pub singular_values: Vec<f64>,
}

/// Rank of `[B, AB, ..., A^{N-1} B]` with a relative singular-value cut.
pub fn kalman_rank<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<KalmanResult>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, B is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let k = b.ncols();
    let mut kal = DMatrix::<T>::zeros(n, n * k);
    let mut blk = b.clone();
    for i in 0..n {
        kal.view_mut((0, i * k), (n, k)).copy_from(&blk);
        blk = a * blk;
    }
    let sv = singular_values(&kal);
    let rank = rank_from_singular_values(&sv, RANK_REL);
    Ok(KalmanResult { rank, n, controllable: rank == n, singular_values: sv })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HautusResult {
    pub controllable: bool,
    /// An eigenvalue where `[lambda I - A, B]` loses rank.
    pub failing_eigenvalue: Option<C64>,
}

fn to_c64<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> CMat {
    m.map(|v| C64::new(v.clone().real(), v.imaginary()))
}

/// PBH test: `rank [lambda I - A, B] = N` for every eigenvalue of `A`.
pub fn hautus_check<T>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<HautusResult>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, B is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let ac = to_c64(a);
    let bc = to_c64(b);
    let k = bc.ncols();
    for lam in crate::linalg::eigenvalues(&ac)? {
        let mut m = CMat::zeros(n, n + k);
        m.view_mut((0, 0), (n, n)).copy_from(&(CMat::identity(n, n) * lam - &ac));
        m.view_mut((0, n), (n, k)).copy_from(&bc);
        let rank = rank_from_singular_values(&singular_values(&m), RANK_REL);
        if rank < n {
            return Ok(HautusResult { controllable: false, failing_eigenvalue: Some(lam) });
        }
    }
    Ok(HautusResult { controllable: true, failing_eigenvalue: None })
}
