//! Normal forms for constant pairs and block structure of varying pairs.
//!
//! `brunovsky` brings a controllable pair `(A, B)` to the block form
//!
//! ```text
//! A~ = [[0, 0], [B~', A~']]    B~ = [[I_m, 0], [0, 0]]
//! ```
//!
//! recursively, through `A~ = Q^{-1}(A Q + B F)` and `B~ = Q^{-1} B M_u`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{
    eigenvalues, norm2, range_basis, rank_from_singular_values, singular_values, to_complex, RMat,
    RANK_REL,
};
use crate::ltv_control::kalman_rank;
use crate::phase_flow::{sample_cosphere, ManifoldModel};
use crate::symbols::{block_index, ScalarField};

#[derive(Debug, Clone)]
pub struct BrunovskyForm {
    pub q: RMat,
    pub f: RMat,
    pub m_u: RMat,
    pub a_tilde: RMat,
    pub b_tilde: RMat,
    /// Nonincreasing block sizes summing to `N`.
    pub blocks: Vec<usize>,
    /// `max |Q^{-1}(AQ + BF) - A~|`.
    pub residual_a: f64,
    /// `max |Q^{-1} B M_u - B~|`.
    pub residual_b: f64,
}

impl BrunovskyForm {
    /// `Q^{-1}(A Q + t B F)`, which moves from `Q^{-1} A Q` at `t = 0` to `A~` at `t = 1`.
    pub fn a_t(&self, a: &RMat, b: &RMat, t: f64) -> Result<RMat> {
        solve(&self.q, &(a * &self.q + (b * &self.f) * t))
    }
}

fn solve(q: &RMat, rhs: &RMat) -> Result<RMat> {
    q.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Numerical("singular change of basis".into()))
}

fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

/// `[[I_r, 0], [0, 0]]` of the given shape.
fn padded_identity(rows: usize, cols: usize, r: usize) -> RMat {
    let mut m = RMat::zeros(rows, cols);
    for i in 0..r.min(rows).min(cols) {
        m[(i, i)] = 1.0;
    }
    m
}

struct Step {
    q: RMat,
    m_u: RMat,
    f: RMat,
    a_tilde: RMat,
    blocks: Vec<usize>,
}

fn recurse(a: &RMat, b: &RMat) -> Result<Step> {
    let (n, k) = (a.nrows(), b.ncols());
    // Right factor: orthogonal V with B V = [B1, ~0], B1 of full column rank.
    let mut stacked = RMat::zeros(n + k, k);
    stacked.view_mut((0, 0), (n, k)).copy_from(b);
    let svd = stacked.svd(false, true);
    let v = svd.v_t.expect("right singular vectors requested").transpose();
    let sv = singular_values(b);
    let m = rank_from_singular_values(&sv, RANK_REL);
    if m == 0 {
        return Err(Error::NotControllable { rank: 0, n });
    }
    let bv = b * &v;
    let b1 = bv.columns(0, m).into_owned();
    let mut q1 = RMat::zeros(n, n);
    q1.view_mut((0, 0), (n, m)).copy_from(&b1);
    if m < n {
        let mut aug = RMat::zeros(n, n + m);
        aug.view_mut((0, 0), (n, m)).copy_from(&b1);
        let full = aug.svd(true, false).u.expect("left singular vectors requested");
        q1.view_mut((0, m), (n, n - m)).copy_from(&full.columns(m, n - m));
    }
    let c = solve(&q1, &(a * &q1))?;
    if m == n {
        let mut f = RMat::zeros(k, n);
        f.view_mut((0, 0), (m, n)).copy_from(&c);
        let f = -(&v * f);
        return Ok(Step { q: q1, m_u: v, f, a_tilde: RMat::zeros(n, n), blocks: vec![m] });
    }
    let c21 = c.view((m, 0), (n - m, m)).into_owned();
    let c22 = c.view((m, m), (n - m, n - m)).into_owned();
    let sub = recurse(&c22, &c21)?;
    let mut q2 = RMat::identity(n, n);
    q2.view_mut((0, m), (m, n - m)).copy_from(&sub.f);
    q2.view_mut((m, m), (n - m, n - m)).copy_from(&sub.q);
    let mut q3 = RMat::identity(n, n);
    q3.view_mut((0, 0), (m, m)).copy_from(&sub.m_u);
    let q = &q1 * q2 * q3;
    let t = solve(&q, &(a * &q))?;
    let mut gu = RMat::identity(k, k);
    gu.view_mut((0, 0), (m, m)).copy_from(&sub.m_u);
    let m_u = &v * gu;
    let mut top = RMat::zeros(k, n);
    top.view_mut((0, 0), (m, n)).copy_from(&t.rows(0, m));
    let f = -(&m_u * top);
    let mut a_tilde = RMat::zeros(n, n);
    a_tilde
        .view_mut((m, 0), (n - m, m))
        .copy_from(&padded_identity(n - m, m, sub.blocks[0]));
    a_tilde.view_mut((m, m), (n - m, n - m)).copy_from(&sub.a_tilde);
    let mut blocks = vec![m];
    blocks.extend(sub.blocks);
    Ok(Step { q, m_u, f, a_tilde, blocks })
}

/// Brunovsky-type normal form of a controllable pair (`A` is `N x N`, `B` is `N x K`).
pub fn brunovsky(a: &RMat, b: &RMat) -> Result<BrunovskyForm> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, B is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if n == 0 || b.ncols() == 0 || b.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("B is empty or zero".into()));
    }
    let kal = kalman_rank(a, b)?;
    if !kal.controllable {
        return Err(Error::NotControllable { rank: kal.rank, n });
    }
    let step = recurse(a, b)?;
    let k = b.ncols();
    let b_tilde = padded_identity(n, k, step.blocks[0]);
    let lhs_a = solve(&step.q, &(a * &step.q + b * &step.f))?;
    let lhs_b = solve(&step.q, &(b * &step.m_u))?;
    Ok(BrunovskyForm {
        residual_a: max_abs(&(lhs_a - &step.a_tilde)),
        residual_b: max_abs(&(lhs_b - &b_tilde)),
        q: step.q,
        f: step.f,
        m_u: step.m_u,
        a_tilde: step.a_tilde,
        b_tilde,
        blocks: step.blocks,
    })
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Number of blocks in the reachable part.
    pub k: usize,
    pub blocks: Vec<usize>,
    /// Orthogonal; columns are the blocks in order, then the unreachable rest.
    pub change_of_basis: RMat,
    pub reachable: bool,
}

fn hcat(a: &RMat, b: &RMat) -> RMat {
    let mut out = RMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

/// Nested subspaces `E_1 = sum range B(x)`, `E_{i+1} = sum A(x) E_i`, and
/// `H_i = E_1 + ... + E_i`, computed from samples of `A` and `B`.
///
/// `tol` is relative to the largest sample norm.
pub fn subdiagonal_decomposition(a_samples: &[RMat], b_samples: &[RMat], tol: f64) -> Result<Decomposition> {
    let n = a_samples
        .first()
        .map(|a| a.nrows())
        .ok_or_else(|| Error::Degenerate("no samples".into()))?;
    if b_samples.is_empty()
        || a_samples.iter().any(|a| a.shape() != (n, n))
        || b_samples.iter().any(|b| b.nrows() != n)
    {
        return Err(Error::DimensionMismatch("inconsistent sample shapes".into()));
    }
    let scale = a_samples
        .iter()
        .map(norm2)
        .chain(b_samples.iter().map(norm2))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let thr = tol * scale;
    let stack = |mats: &[RMat]| mats.iter().skip(1).fold(mats[0].clone(), |acc, m| hcat(&acc, m));
    let mut e = range_basis(&stack(b_samples), thr);
    let mut h = e.clone();
    let mut parts = vec![e.clone()];
    while h.ncols() < n && e.ncols() > 0 {
        let images: Vec<RMat> = a_samples.iter().map(|a| a * &e).collect();
        let next = range_basis(&stack(&images), thr);
        let proj = &next - &h * (h.transpose() * &next);
        let fresh = range_basis(&proj, tol);
        if fresh.ncols() == 0 {
            break;
        }
        h = hcat(&h, &fresh);
        parts.push(fresh);
        e = next;
    }
    if parts[0].ncols() == 0 {
        parts.clear();
    }
    let blocks: Vec<usize> = parts.iter().map(|p| p.ncols()).collect();
    let reachable = h.ncols() == n;
    let mut q = RMat::zeros(n, 0);
    for p in &parts {
        q = hcat(&q, p);
    }
    if !reachable {
        let rest = RMat::identity(n, n) - &q * q.transpose();
        q = hcat(&q, &range_basis(&rest, 1e-8));
    }
    Ok(Decomposition { k: blocks.len(), blocks, change_of_basis: q, reachable })
}

/// Splits `A` into its first sub-diagonal blocks and the remainder.
pub fn split_sub_r(a: &RMat, blocks: &[usize]) -> Result<(RMat, RMat)> {
    let n = a.nrows();
    if a.ncols() != n || blocks.contains(&0) || blocks.iter().sum::<usize>() != n {
        return Err(Error::BadBlocks(format!("{blocks:?} for a {}x{} matrix", a.nrows(), a.ncols())));
    }
    let blk = block_index(blocks);
    let mut sub = RMat::zeros(n, n);
    let mut rest = a.clone();
    for i in 0..n {
        for j in 0..n {
            if blk[i] == blk[j] + 1 {
                sub[(i, j)] = a[(i, j)];
                rest[(i, j)] = 0.0;
            }
        }
    }
    Ok((sub, rest))
}

/// Sobolev exponents of the product space `H^s x H^{s+1} x ... x H^{s+k-1}`,
/// one entry per component.
pub fn multilevel_space(blocks: &[usize], s: f64) -> Vec<f64> {
    blocks
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| core::iter::repeat_n(s + i as f64, d))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaSign {
    NonNeg,
    NonPos,
    Mixed,
    /// No coupling weight given; treated as the constant 1.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UcpAssumption {
    One,
    Two,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcpVerdict {
    pub kalman_transposed: bool,
    pub distinct_eigenvalues: usize,
    pub domains_intersect: bool,
    pub sign_condition_beta: BetaSign,
    pub assumption: UcpAssumption,
}

/// Number of eigenvalue clusters with single-linkage gap `1e-7 ||A||`.
pub fn distinct_eigenvalues(a: &RMat) -> Result<usize> {
    let ev = eigenvalues(&to_complex(a))?;
    let gap = 1e-7 * norm2(a);
    let n = ev.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= gap {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    Ok((0..n).filter(|&i| find(&mut parent, i) == i).count())
}

/// Sufficient check for unique continuation of `-Lap V + A* V = lambda V`,
/// `B* V = 0` on `omega`, with `A`, `B` constant (`N x N`, `N x K`).
///
/// `alpha` describes `omega = {alpha != 0}` and `beta` the coupling region.
/// Fields are scanned on a grid of `n_grid` base points per axis.
pub fn ucp_precheck(
    m: &ManifoldModel,
    a: &RMat,
    b: &RMat,
    alpha: &ScalarField,
    beta: Option<&ScalarField>,
    n_grid: usize,
) -> Result<UcpVerdict> {
    let kalman_transposed = kalman_rank(a, b)?.controllable;
    let distinct = distinct_eigenvalues(a)?;
    let base = sample_cosphere(m, n_grid, 1)?;
    let av: Vec<f64> = base.iter().map(|p| alpha.eval(m, 0.0, p.x()).norm()).collect();
    let a_thr = 1e-8 * av.iter().fold(0.0, |x: f64, v| x.max(*v));
    let (domains_intersect, sign) = match beta {
        None => (av.iter().any(|&v| v > a_thr && a_thr > 0.0), BetaSign::NotApplicable),
        Some(beta) => {
            let bv: Vec<_> = base.iter().map(|p| beta.eval(m, 0.0, p.x())).collect();
            let sup = bv.iter().fold(0.0, |x: f64, v| x.max(v.norm()));
            let b_thr = 1e-8 * sup;
            let meet = a_thr > 0.0
                && b_thr > 0.0
                && av.iter().zip(&bv).any(|(&x, y)| x > a_thr && y.norm() > b_thr);
            let complex = bv.iter().any(|v| v.im.abs() > b_thr);
            let has_pos = bv.iter().any(|v| v.re > b_thr);
            let has_neg = bv.iter().any(|v| v.re < -b_thr);
            let sign = match (complex, has_pos, has_neg) {
                (true, _, _) | (false, true, true) => BetaSign::Mixed,
                (false, _, false) => BetaSign::NonNeg,
                (false, false, true) => BetaSign::NonPos,
            };
            (meet, sign)
        }
    };
    let sign_ok = sign != BetaSign::Mixed;
    let assumption = if kalman_transposed && sign_ok && distinct == 1 {
        UcpAssumption::One
    } else if kalman_transposed && sign_ok && domains_intersect {
        UcpAssumption::Two
    } else {
        UcpAssumption::None
    };
    Ok(UcpVerdict {
        kalman_transposed,
        distinct_eigenvalues: distinct,
        domains_intersect,
        sign_condition_beta: sign,
        assumption,
    })
}
