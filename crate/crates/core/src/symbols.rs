//! Matrix-valued symbols of order zero and one.
//!
//! A symbol is stored as two matrices of scalar fields. `order0` holds the
//! order-zero part; `order1` holds the coefficient of `|xi|` in the order-one
//! part. Coefficients depend on time and position but not on the direction.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, pow, sin};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::phase_flow::{Branch, ManifoldModel, PhasePoint};

#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    /// Integer wave vector; only the first `d` entries are used.
    pub k: [i32; 2],
    pub coef: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub powers: [u32; 3],
    pub coef: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqTerm {
    pub omega: f64,
    pub coef: C64,
}

/// Position dependence of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub enum Spatial {
    Constant(C64),
    /// `sum c exp(i sum_j 2 pi k_j x_j / L_j)`, torus only.
    TrigPoly(Vec<TrigTerm>),
    /// Polynomial in the ambient coordinates.
    AmbientPoly(Vec<PolyTerm>),
    Bump(Bump),
}

/// Time dependence, multiplied onto the spatial part.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFactor {
    Constant(C64),
    /// `sum c exp(i omega t)`.
    TrigPoly(Vec<FreqTerm>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub spatial: Spatial,
    pub time: Option<TimeFactor>,
}

/// Smooth cut-off: 1 up to `r_in`, 0 from `r_out`, exponential bridge between.
pub fn bump_profile(d: f64, r_in: f64, r_out: f64) -> f64 {
    if d <= r_in {
        1.0
    } else if d >= r_out {
        0.0
    } else {
        let s = (d - r_in) / (r_out - r_in);
        exp(1.0 - 1.0 / (1.0 - s * s))
    }
}

impl ScalarField {
    pub fn constant(c: C64) -> Self {
        ScalarField { spatial: Spatial::Constant(c), time: None }
    }

    pub fn real(r: f64) -> Self {
        Self::constant(C64::new(r, 0.0))
    }

    pub fn zero() -> Self {
        Self::real(0.0)
    }

    pub fn trig(terms: Vec<TrigTerm>) -> Self {
        ScalarField { spatial: Spatial::TrigPoly(terms), time: None }
    }

    pub fn poly(terms: Vec<PolyTerm>) -> Self {
        ScalarField { spatial: Spatial::AmbientPoly(terms), time: None }
    }

    pub fn with_time(mut self, time: TimeFactor) -> Self {
        self.time = Some(time);
        self
    }

    /// Multiplies the field by a constant.
    pub fn scaled(mut self, c: C64) -> Self {
        self.time = Some(match self.time {
            None => TimeFactor::Constant(c),
            Some(TimeFactor::Constant(a)) => TimeFactor::Constant(a * c),
            Some(TimeFactor::TrigPoly(terms)) => TimeFactor::TrigPoly(
                terms
                    .into_iter()
                    .map(|t| FreqTerm { omega: t.omega, coef: t.coef * c })
                    .collect(),
            ),
        });
        self
    }

    /// Pointwise complex conjugate.
    pub fn conj(&self) -> Self {
        let spatial = match &self.spatial {
            Spatial::Constant(c) => Spatial::Constant(c.conj()),
            Spatial::TrigPoly(terms) => Spatial::TrigPoly(
                terms
                    .iter()
                    .map(|t| TrigTerm { k: [-t.k[0], -t.k[1]], coef: t.coef.conj() })
                    .collect(),
            ),
            Spatial::AmbientPoly(terms) => Spatial::AmbientPoly(
                terms
                    .iter()
                    .map(|t| PolyTerm { powers: t.powers, coef: t.coef.conj() })
                    .collect(),
            ),
            Spatial::Bump(b) => Spatial::Bump(b.clone()),
        };
        let time = self.time.as_ref().map(|tf| match tf {
            TimeFactor::Constant(c) => TimeFactor::Constant(c.conj()),
            TimeFactor::TrigPoly(terms) => TimeFactor::TrigPoly(
                terms
                    .iter()
                    .map(|t| FreqTerm { omega: -t.omega, coef: t.coef.conj() })
                    .collect(),
            ),
        });
        ScalarField { spatial, time }
    }

    /// True when the field vanishes identically by construction.
    pub fn is_zero(&self) -> bool {
        let spatial_zero = match &self.spatial {
            Spatial::Constant(c) => *c == C64::new(0.0, 0.0),
            Spatial::TrigPoly(t) => t.iter().all(|t| t.coef == C64::new(0.0, 0.0)),
            Spatial::AmbientPoly(t) => t.iter().all(|t| t.coef == C64::new(0.0, 0.0)),
            Spatial::Bump(_) => false,
        };
        let time_zero = match &self.time {
            None => false,
            Some(TimeFactor::Constant(c)) => *c == C64::new(0.0, 0.0),
            Some(TimeFactor::TrigPoly(t)) => t.iter().all(|t| t.coef == C64::new(0.0, 0.0)),
        };
        spatial_zero || time_zero
    }

    pub fn is_time_independent(&self) -> bool {
        match &self.time {
            None | Some(TimeFactor::Constant(_)) => true,
            Some(TimeFactor::TrigPoly(t)) => t.iter().all(|t| t.omega == 0.0),
        }
    }

    /// Checks that the field makes sense on `m`.
    pub fn check(&self, m: &ManifoldModel) -> Result<()> {
        match (&self.spatial, m) {
            (Spatial::TrigPoly(_), ManifoldModel::RoundSphere) => Err(Error::NotSupported(
                "trigonometric fields are only defined on tori".into(),
            )),
            (Spatial::TrigPoly(terms), ManifoldModel::FlatTorus { periods }) => {
                if periods.len() == 1 && terms.iter().any(|t| t.k[1] != 0) {
                    return Err(Error::DimensionMismatch(
                        "second wave number on a circle".into(),
                    ));
                }
                Ok(())
            }
            (Spatial::Bump(b), _) => {
                if !(b.r_in >= 0.0 && b.r_out > b.r_in && b.r_out.is_finite()) {
                    return Err(Error::BadRadii { r_in: b.r_in, r_out: b.r_out });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, m: &ManifoldModel, t: f64, x: &[f64]) -> C64 {
        let s = match &self.spatial {
            Spatial::Constant(c) => *c,
            Spatial::TrigPoly(terms) => {
                let periods: &[f64] = match m {
                    ManifoldModel::FlatTorus { periods } => periods,
                    ManifoldModel::RoundSphere => &[],
                };
                terms
                    .iter()
                    .map(|term| {
                        let ph: f64 = periods
                            .iter()
                            .enumerate()
                            .map(|(j, &l)| 2.0 * PI * term.k[j] as f64 * x[j] / l)
                            .sum();
                        term.coef * C64::new(cos(ph), sin(ph))
                    })
                    .sum()
            }
            Spatial::AmbientPoly(terms) => terms
                .iter()
                .map(|term| {
                    let mut v = term.coef;
                    for (j, &p) in term.powers.iter().enumerate() {
                        if p > 0 {
                            v *= pow(x.get(j).copied().unwrap_or(0.0), p as f64);
                        }
                    }
                    v
                })
                .sum(),
            Spatial::Bump(b) => {
                let d = m.distance(x, &b.center[..x.len()]);
                C64::new(bump_profile(d, b.r_in, b.r_out), 0.0)
            }
        };
        match &self.time {
            None => s,
            Some(TimeFactor::Constant(c)) => s * c,
            Some(TimeFactor::TrigPoly(terms)) => {
                let f: C64 = terms
                    .iter()
                    .map(|term| term.coef * C64::new(cos(term.omega * t), sin(term.omega * t)))
                    .sum();
                s * f
            }
        }
    }
}

/// Smooth indicator of a geodesic ball around `center`.
///
/// The support has geodesic diameter `2 * r_out`.
pub fn bump_indicator(m: &ManifoldModel, center: &[f64], r_in: f64, r_out: f64) -> Result<ScalarField> {
    if !(r_in >= 0.0 && r_out > r_in && r_out.is_finite()) {
        return Err(Error::BadRadii { r_in, r_out });
    }
    if center.len() != m.coord_len() {
        return Err(Error::DimensionMismatch(format!(
            "bump center has {} coordinates",
            center.len()
        )));
    }
    let mut c = [0.0; 3];
    c[..center.len()].copy_from_slice(center);
    if let ManifoldModel::RoundSphere = m {
        let n = libm::sqrt(c.iter().map(|v| v * v).sum::<f64>());
        if !(n > 0.0) {
            return Err(Error::InvalidPhasePoint("bump center at the origin".into()));
        }
        c.iter_mut().for_each(|v| *v /= n);
    }
    Ok(ScalarField { spatial: Spatial::Bump(Bump { center: c, r_in, r_out }), time: None })
}

/// A `rows x cols` symbol with order-zero and order-one parts.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSymbol {
    rows: usize,
    cols: usize,
    order0: Vec<ScalarField>,
    order1: Vec<ScalarField>,
}

impl MatrixSymbol {
    /// Entries are given row-major.
    pub fn new(
        m: &ManifoldModel,
        rows: usize,
        cols: usize,
        order0: Vec<ScalarField>,
        order1: Vec<ScalarField>,
    ) -> Result<Self> {
        if order0.len() != rows * cols || order1.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} symbol with {} and {} entries",
                order0.len(),
                order1.len()
            )));
        }
        for f in order0.iter().chain(order1.iter()) {
            f.check(m)?;
        }
        Ok(MatrixSymbol { rows, cols, order0, order1 })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        let z = || (0..rows * cols).map(|_| ScalarField::zero()).collect();
        MatrixSymbol { rows, cols, order0: z(), order1: z() }
    }

    /// Symbol with constant coefficient matrices.
    pub fn constant(order0: &CMat, order1: &CMat) -> Result<Self> {
        if order0.shape() != order1.shape() {
            return Err(Error::DimensionMismatch("order0 and order1 shapes differ".into()));
        }
        let (rows, cols) = order0.shape();
        let lift = |a: &CMat| {
            (0..rows * cols)
                .map(|i| ScalarField::constant(a[(i / cols, i % cols)]))
                .collect()
        };
        Ok(MatrixSymbol { rows, cols, order0: lift(order0), order1: lift(order1) })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn order0(&self) -> &[ScalarField] {
        &self.order0
    }

    pub fn order1(&self) -> &[ScalarField] {
        &self.order1
    }

    /// True when the order-one part vanishes identically.
    ///
    /// With direction-independent coefficients this is exactly when the
    /// `+` branch at `(x, -xi)` matches the `-` branch at `(x, xi)`.
    pub fn parity_flag(&self) -> bool {
        self.order1.iter().all(ScalarField::is_zero)
    }

    pub fn is_zero(&self) -> bool {
        self.parity_flag() && self.order0.iter().all(ScalarField::is_zero)
    }

    pub fn is_time_independent(&self) -> bool {
        self.order0.iter().chain(&self.order1).all(ScalarField::is_time_independent)
    }

    /// `order0 +- order1 / i` at `(t, p)`, sign taken from `branch`.
    pub fn eval_combined(
        &self,
        m: &ManifoldModel,
        branch: Branch,
        t: f64,
        p: &PhasePoint,
    ) -> Result<CMat> {
        // 1/i = -i
        let w = C64::new(0.0, -branch.sign());
        let x = p.x();
        let mut out = CMat::zeros(self.rows, self.cols);
        for i in 0..self.rows * self.cols {
            let f1 = &self.order1[i];
            let mut v = self.order0[i].eval(m, t, x);
            if !f1.is_zero() {
                v += w * f1.eval(m, t, x);
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFiniteSymbol { t });
            }
            out[(i / self.cols, i % self.cols)] = v;
        }
        Ok(out)
    }

    /// Order-zero part alone at `(t, x)`.
    pub fn eval_order0(&self, m: &ManifoldModel, t: f64, x: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.order0[i * self.cols + j].eval(m, t, x))
    }

    /// Coefficient of `|xi|` alone at `(t, x)`.
    pub fn eval_order1(&self, m: &ManifoldModel, t: f64, x: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.order1[i * self.cols + j].eval(m, t, x))
    }
}

/// Zero-order coupling `A(x)` with observation `B(x)` and a block structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroOrderCoupling {
    pub n: usize,
    pub k: usize,
    /// `n x n`, row-major.
    pub a: Vec<ScalarField>,
    /// `n x k`, row-major.
    pub b: Vec<ScalarField>,
    pub block_sizes: Vec<usize>,
}

impl ZeroOrderCoupling {
    pub fn eval_a(&self, m: &ManifoldModel, x: &[f64]) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.a[i * self.n + j].eval(m, 0.0, x))
    }

    pub fn eval_b(&self, m: &ManifoldModel, x: &[f64]) -> CMat {
        CMat::from_fn(self.n, self.k, |i, j| self.b[i * self.k + j].eval(m, 0.0, x))
    }
}

/// Block index of each row for the given block sizes.
pub fn block_index(block_sizes: &[usize]) -> Vec<usize> {
    block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &d)| core::iter::repeat_n(b, d))
        .collect()
}

/// Rewrites a zero-order coupling as an order-one coupling symbol plus an
/// order-one observation symbol.
///
/// On the `-` branch the transported system becomes
/// `X' = A_sub X / 2 + B u / 2`. Entries of `A` outside the first
/// sub-diagonal blocks and rows of `B` outside the first block must vanish.
pub fn lift_zero_order(
    m: &ManifoldModel,
    z: &ZeroOrderCoupling,
) -> Result<(MatrixSymbol, MatrixSymbol)> {
    let (n, k) = (z.n, z.k);
    if z.a.len() != n * n || z.b.len() != n * k {
        return Err(Error::DimensionMismatch("coupling matrix sizes".into()));
    }
    if z.block_sizes.contains(&0) || z.block_sizes.iter().sum::<usize>() != n {
        return Err(Error::BadBlocks(format!("{:?} for N = {n}", z.block_sizes)));
    }
    let blk = block_index(&z.block_sizes);
    for i in 0..n {
        for j in 0..n {
            if blk[i] != blk[j] + 1 && !z.a[i * n + j].is_zero() {
                return Err(Error::BadBlocks(format!(
                    "A[{i}][{j}] lies outside the sub-diagonal blocks"
                )));
            }
        }
        if blk[i] != 0 && (0..k).any(|j| !z.b[i * k + j].is_zero()) {
            return Err(Error::BadBlocks(format!("B row {i} lies outside the first block")));
        }
    }
    let minus_i = C64::new(0.0, -1.0);
    // The minus branch evaluates to order0 + i * order1, so order1 = -i * M*
    // gives M* there and the drift (M*)* / 2 = M / 2.
    let a1 = (0..n * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            z.a[c * n + r].conj().scaled(minus_i)
        })
        .collect();
    let d1 = (0..k * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            z.b[c * k + r].conj().scaled(minus_i)
        })
        .collect();
    let coupling = MatrixSymbol::new(m, n, n, (0..n * n).map(|_| ScalarField::zero()).collect(), a1)?;
    let observation =
        MatrixSymbol::new(m, k, n, (0..k * n).map(|_| ScalarField::zero()).collect(), d1)?;
    Ok((coupling, observation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn circle() -> ManifoldModel {
        ManifoldModel::circle(2.0 * PI).unwrap()
    }

    #[test]
    fn combined_symbol_signs() {
        let m = circle();
        let id = CMat::identity(2, 2);
        let s = MatrixSymbol::constant(&CMat::zeros(2, 2), &id.scale(3.0)).unwrap();
        let p = PhasePoint::new(&[0.1], &[1.0]).unwrap();
        let plus = s.eval_combined(&m, Branch::Plus, 0.0, &p).unwrap();
        let minus = s.eval_combined(&m, Branch::Minus, 0.0, &p).unwrap();
        assert!((plus[(0, 0)] - c(0.0, -3.0)).norm() < 1e-15);
        assert!((minus[(1, 1)] - c(0.0, 3.0)).norm() < 1e-15);
        assert!(plus[(0, 1)].norm() == 0.0);
    }

    #[test]
    fn bump_plateau_and_support() {
        let m = circle();
        let b = bump_indicator(&m, &[0.0], 0.2, 0.5).unwrap();
        assert_eq!(b.eval(&m, 0.0, &[0.1]).re, 1.0);
        assert_eq!(b.eval(&m, 0.0, &[2.0 * PI - 0.1]).re, 1.0);
        assert_eq!(b.eval(&m, 0.0, &[0.6]).re, 0.0);
        let mid = b.eval(&m, 0.0, &[0.35]).re;
        assert!(mid > 0.0 && mid < 1.0);
        assert!(bump_indicator(&m, &[0.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn trig_field_on_circle() {
        let m = circle();
        let f = ScalarField::trig(alloc::vec![
            TrigTerm { k: [1, 0], coef: c(0.5, 0.0) },
            TrigTerm { k: [-1, 0], coef: c(0.5, 0.0) },
        ]);
        assert!((f.eval(&m, 0.0, &[PI / 3.0]).re - 0.5).abs() < 1e-15);
        assert!(f.check(&ManifoldModel::sphere()).is_err());
        let g = f.conj().scaled(c(0.0, 1.0));
        assert!((g.eval(&m, 0.0, &[0.0]) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn time_factor_multiplies() {
        let m = circle();
        let f = ScalarField::real(2.0).with_time(TimeFactor::TrigPoly(alloc::vec![
            FreqTerm { omega: 1.0, coef: c(0.0, -0.5) },
            FreqTerm { omega: -1.0, coef: c(0.0, 0.5) },
        ]));
        assert!(f.eval(&m, 0.0, &[1.0]).norm() < 1e-15);
        assert!((f.eval(&m, 0.7, &[1.0]).re - 2.0 * libm::sin(0.7)).abs() < 1e-14);
        assert!(!f.is_time_independent());
    }

    #[test]
    fn lift_rejects_misplaced_entries() {
        let m = circle();
        let z = ZeroOrderCoupling {
            n: 2,
            k: 1,
            a: alloc::vec![ScalarField::real(1.0), ScalarField::zero(), ScalarField::zero(), ScalarField::zero()],
            b: alloc::vec![ScalarField::real(1.0), ScalarField::zero()],
            block_sizes: alloc::vec![1, 1],
        };
        assert!(matches!(lift_zero_order(&m, &z), Err(Error::BadBlocks(_))));
        let z2 = ZeroOrderCoupling { block_sizes: alloc::vec![1, 2], ..z };
        assert!(matches!(lift_zero_order(&m, &z2), Err(Error::BadBlocks(_))));
    }

    #[test]
    fn lifted_symbol_gives_half_sub_diagonal() {
        let m = circle();
        let z = ZeroOrderCoupling {
            n: 2,
            k: 1,
            a: alloc::vec![ScalarField::zero(), ScalarField::zero(), ScalarField::real(2.0), ScalarField::zero()],
            b: alloc::vec![ScalarField::real(3.0), ScalarField::zero()],
            block_sizes: alloc::vec![1, 1],
        };
        let (a, d) = lift_zero_order(&m, &z).unwrap();
        let p = PhasePoint::new(&[0.0], &[1.0]).unwrap();
        let drift = a.eval_combined(&m, Branch::Minus, 0.0, &p).unwrap().adjoint().scale(0.5);
        let control = d.eval_combined(&m, Branch::Minus, 0.0, &p).unwrap().adjoint().scale(0.5);
        assert!((drift[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(drift[(0, 1)].norm() < 1e-15);
        assert!((control[(0, 0)] - c(1.5, 0.0)).norm() < 1e-15);
        assert!(!a.parity_flag());
    }
}
