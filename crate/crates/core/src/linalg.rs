//! Small dense linear-algebra helpers shared by the modules.

use alloc::vec::Vec;
use nalgebra::{ComplexField, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

/// Relative threshold above which a Gramian eigenvalue counts as positive.
pub const POSITIVE_REL: f64 = 1e-9;
/// Relative threshold below which a Gramian eigenvalue counts as zero.
pub const SINGULAR_REL: f64 = 1e-12;
/// Relative singular-value cut used for numerical rank.
pub const RANK_REL: f64 = 1e-9;

/// Three-way verdict on positive definiteness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Positivity {
    Positive,
    Singular,
    Indeterminate,
}

impl Positivity {
    /// Classifies `value` against a scale, with an explicit grey band in between.
    pub fn classify(value: f64, scale: f64) -> Self {
        if !(scale > 0.0) {
            return Positivity::Singular;
        }
        if value > POSITIVE_REL * scale {
            Positivity::Positive
        } else if value < SINGULAR_REL * scale {
            Positivity::Singular
        } else {
            Positivity::Indeterminate
        }
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Singular values sorted in descending order.
pub fn singular_values<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let sv = m.clone().singular_values();
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Number of singular values above `rel * sigma_max`.
pub fn rank_from_singular_values(sv: &[f64], rel: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * smax).count()
}

/// Orthonormal basis (as columns) of the column space of `m`.
///
/// Singular values below `abs_tol` are dropped.
pub fn range_basis(m: &RMat, abs_tol: f64) -> RMat {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return RMat::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > abs_tol)
        .collect();
    let mut out = RMat::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Orthonormal basis of the kernel of a square matrix.
pub fn null_space(m: &CMat, abs_tol: f64) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= abs_tol)
        .collect();
    let mut out = CMat::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        for r in 0..n {
            out[(r, j)] = vt[(i, r)].conj();
        }
    }
    out
}

/// Eigenvalues of a general complex square matrix via a Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Spectral norm.
pub fn norm2<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Composite Simpson weights for `n` (even) intervals of width `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = alloc::vec![0.0; n + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        *wj = if j == 0 || j == n {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        *wj *= h / 3.0;
    }
    w
}

pub fn cvec_norm(v: &DVector<C64>) -> f64 {
    v.norm()
}
