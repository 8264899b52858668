//! Fourier-Galerkin solver for coupled Klein-Gordon systems on the circle.
//!
//! Solves `(d_t^2 - Lap + 1) V + B0 d_t V + B1 V = 0` for `V` with `N`
//! components on `R / 2 pi Z`, keeping modes `|k| <= M`. `B0` multiplies by
//! the order-zero coefficients of a symbol, `B1` applies the order-one
//! coefficient after `Lambda = (1 - Lap)^{1/2}` and adds a constant
//! potential. Products are formed on a collocation grid of `4M` points.
//!
//! A function is stored as `f(x) = sum_k f_k exp(i k x)`, so that
//! `||f||^2 = 2 pi sum |f_k|^2`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, hermitian_eigen, null_space, simpson_weights, CMat, C64};
use crate::observability::{branch_gramian, ObservabilityScenario};
use crate::phase_flow::{wrap_centered, Branch, ManifoldModel, PhasePoint};
use crate::symbols::{bump_profile, MatrixSymbol, ScalarField};

/// Largest admissible `dt * (M + 1)`.
pub const CFL: f64 = 0.5;

fn check_circle(m: &ManifoldModel) -> Result<()> {
    match m {
        ManifoldModel::FlatTorus { periods } if periods.len() == 1 && (periods[0] - 2.0 * PI).abs() < 1e-12 => Ok(()),
        _ => Err(Error::NotSupported("the spectral solver runs on the circle of length 2 pi".into())),
    }
}

/// `(V, d_t V)` as Fourier coefficients, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub n: usize,
    pub modes: usize,
    pub v: Vec<C64>,
    pub w: Vec<C64>,
}

impl SpectralState {
    pub fn zeros(n: usize, modes: usize) -> Self {
        let len = n * (2 * modes + 1);
        SpectralState { n, modes, v: vec![C64::new(0.0, 0.0); len], w: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn width(&self) -> usize {
        2 * self.modes + 1
    }

    /// Wave number of slot `i` within a component.
    pub fn wavenumber(&self, i: usize) -> i64 {
        i as i64 - self.modes as i64
    }

    pub fn index(&self, comp: usize, k: i64) -> usize {
        comp * self.width() + (k + self.modes as i64) as usize
    }

    /// `int |d_t V|^2 + |grad V|^2 + |V|^2`.
    pub fn energy(&self) -> f64 {
        let wd = self.width();
        let mut e = 0.0;
        for (i, (v, w)) in self.v.iter().zip(&self.w).enumerate() {
            let k = self.wavenumber(i % wd) as f64;
            e += w.norm_sqr() + (k * k + 1.0) * v.norm_sqr();
        }
        2.0 * PI * e
    }
}

pub fn japanese(k: i64) -> f64 {
    ((k * k) as f64 + 1.0).sqrt()
}

/// `||f||_{H^s}^2` for one coefficient vector of width `2M + 1`.
pub fn hs_norm_sq(f: &[C64], s: f64) -> f64 {
    let m = (f.len() / 2) as i64;
    2.0 * PI
        * f.iter()
            .enumerate()
            .map(|(i, z)| japanese(i as i64 - m).powf(2.0 * s) * z.norm_sqr())
            .sum::<f64>()
}

/// `(V_+, V_-) = (i Lambda V_0 + V_1, -i Lambda V_0 + V_1)`.
pub fn halfwave(s: &SpectralState) -> (Vec<C64>, Vec<C64>) {
    let wd = s.width();
    let mut plus = Vec::with_capacity(s.v.len());
    let mut minus = Vec::with_capacity(s.v.len());
    for (i, (v, w)) in s.v.iter().zip(&s.w).enumerate() {
        let lv = v * japanese(s.wavenumber(i % wd));
        plus.push(C64::new(0.0, 1.0) * lv + w);
        minus.push(C64::new(0.0, -1.0) * lv + w);
    }
    (plus, minus)
}

/// Inverse of [`halfwave`].
pub fn halfwave_inverse(n: usize, modes: usize, plus: &[C64], minus: &[C64]) -> SpectralState {
    let mut s = SpectralState::zeros(n, modes);
    let wd = s.width();
    for i in 0..s.v.len() {
        let l = japanese(i as i64 % wd as i64 - modes as i64);
        s.v[i] = (plus[i] - minus[i]) / (C64::new(0.0, 2.0) * l);
        s.w[i] = (plus[i] + minus[i]) * 0.5;
    }
    s
}

/// FFT plans and grid for products with variable coefficients.
struct Collocation {
    modes: usize,
    g: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    x: Vec<f64>,
}

impl Collocation {
    fn new(modes: usize) -> Self {
        let g = (4 * modes).max(16);
        let mut planner = FftPlanner::new();
        Collocation {
            modes,
            g,
            fwd: planner.plan_fft_forward(g),
            inv: planner.plan_fft_inverse(g),
            x: (0..g).map(|j| 2.0 * PI * j as f64 / g as f64).collect(),
        }
    }

    fn to_grid(&self, coef: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.g];
        let m = self.modes as i64;
        for (i, c) in coef.iter().enumerate() {
            let k = i as i64 - m;
            buf[k.rem_euclid(self.g as i64) as usize] = *c;
        }
        self.inv.process(&mut buf);
        buf
    }

    fn to_coef(&self, mut vals: Vec<C64>) -> Vec<C64> {
        self.fwd.process(&mut vals);
        let m = self.modes as i64;
        let scale = 1.0 / self.g as f64;
        (-m..=m)
            .map(|k| vals[k.rem_euclid(self.g as i64) as usize] * scale)
            .collect()
    }
}

/// Coupling of the Klein-Gordon form: `B0 = order0(symbol)`,
/// `B1 = order1(symbol) Lambda + potential`.
#[derive(Debug, Clone)]
pub struct KgCoupling {
    pub symbol: MatrixSymbol,
    pub potential: CMat,
}

impl KgCoupling {
    pub fn none(n: usize) -> Self {
        KgCoupling { symbol: MatrixSymbol::zeros(n, n), potential: CMat::zeros(n, n) }
    }

    fn is_zero(&self) -> bool {
        self.symbol.is_zero() && self.potential.iter().all(|z| z.norm() == 0.0)
    }
}

struct Rhs<'a> {
    m: ManifoldModel,
    col: &'a Collocation,
    coupling: &'a KgCoupling,
    has0: bool,
    has1: bool,
    frozen: Option<(Vec<CMat>, Vec<CMat>)>,
}

impl<'a> Rhs<'a> {
    fn new(col: &'a Collocation, coupling: &'a KgCoupling) -> Self {
        let m = ManifoldModel::circle(2.0 * PI).expect("valid period");
        let has0 = !coupling.symbol.order0().iter().all(ScalarField::is_zero);
        let has1 = !coupling.symbol.parity_flag();
        let frozen = coupling.symbol.is_time_independent().then(|| {
            let a0 = col.x.iter().map(|&x| coupling.symbol.eval_order0(&m, 0.0, &[x])).collect();
            let a1 = col.x.iter().map(|&x| coupling.symbol.eval_order1(&m, 0.0, &[x])).collect();
            (a0, a1)
        });
        Rhs { m, col, coupling, has0, has1, frozen }
    }

    /// `sum_j M(t, x)[c][j] u_j(x)` projected back to the modes.
    fn multiply(&self, t: f64, order: usize, u: &[C64], n: usize, out: &mut [C64]) {
        let wd = 2 * self.col.modes + 1;
        let grids: Vec<Vec<C64>> = (0..n).map(|c| self.col.to_grid(&u[c * wd..(c + 1) * wd])).collect();
        for c in 0..n {
            let mut vals = vec![C64::new(0.0, 0.0); self.col.g];
            for (j, x) in self.col.x.iter().enumerate() {
                let mat = match (&self.frozen, order) {
                    (Some((a0, _)), 0) => a0[j].row(c).into_owned(),
                    (Some((_, a1)), _) => a1[j].row(c).into_owned(),
                    (None, 0) => self.coupling.symbol.eval_order0(&self.m, t, &[*x]).row(c).into_owned(),
                    (None, _) => self.coupling.symbol.eval_order1(&self.m, t, &[*x]).row(c).into_owned(),
                };
                vals[j] = (0..n).map(|d| mat[d] * grids[d][j]).sum();
            }
            let coef = self.col.to_coef(vals);
            for (o, v) in out[c * wd..(c + 1) * wd].iter_mut().zip(coef) {
                *o += v;
            }
        }
    }

    /// Returns `(V', W')`.
    fn eval(&self, t: f64, s: &SpectralState) -> (Vec<C64>, Vec<C64>) {
        let wd = s.width();
        let n = s.n;
        let mut acc = vec![C64::new(0.0, 0.0); s.v.len()];
        if self.has0 {
            self.multiply(t, 0, &s.w, n, &mut acc);
        }
        if self.has1 {
            let lv: Vec<C64> = s.v.iter().enumerate().map(|(i, v)| v * japanese(s.wavenumber(i % wd))).collect();
            self.multiply(t, 1, &lv, n, &mut acc);
        }
        let p = &self.coupling.potential;
        let mut dw = Vec::with_capacity(s.v.len());
        for c in 0..n {
            for i in 0..wd {
                let k = s.wavenumber(i) as f64;
                let mut val = -s.v[c * wd + i] * (k * k + 1.0) - acc[c * wd + i];
                for d in 0..n {
                    if p[(c, d)].norm() != 0.0 {
                        val -= p[(c, d)] * s.v[d * wd + i];
                    }
                }
                dw.push(val);
            }
        }
        (s.w.clone(), dw)
    }
}

fn axpy(s: &SpectralState, h: f64, dv: &[C64], dw: &[C64]) -> SpectralState {
    let mut out = s.clone();
    for (o, d) in out.v.iter_mut().zip(dv) {
        *o += d * h;
    }
    for (o, d) in out.w.iter_mut().zip(dw) {
        *o += d * h;
    }
    out
}

/// Number of RK4 steps and their size; the count is even so that Simpson
/// quadrature can run on the same grid.
pub fn step_plan(horizon: f64, dt: f64) -> (usize, f64) {
    let mut n = (horizon / dt).ceil() as usize;
    n += n % 2;
    let n = n.max(2);
    (n, horizon / n as f64)
}

/// Integrates from `t = 0` to `horizon` with RK4. `observer` sees every
/// step including the initial state.
pub fn evolve(
    state: &SpectralState,
    coupling: &KgCoupling,
    horizon: f64,
    dt: f64,
    observer: &mut dyn FnMut(f64, &SpectralState),
) -> Result<SpectralState> {
    if coupling.symbol.rows() != state.n || coupling.potential.shape() != (state.n, state.n) {
        return Err(Error::DimensionMismatch("coupling does not match the state".into()));
    }
    if !(dt > 0.0) || dt * (state.modes as f64 + 1.0) > CFL {
        return Err(Error::Unstable { dt, modes: state.modes });
    }
    let col = Collocation::new(state.modes);
    let rhs = Rhs::new(&col, coupling);
    let (n_steps, h) = step_plan(horizon, dt);
    let uncoupled = coupling.is_zero();
    let e0 = state.energy();
    let mut s = state.clone();
    observer(0.0, &s);
    for j in 0..n_steps {
        let t = j as f64 * h;
        let (v1, w1) = rhs.eval(t, &s);
        let (v2, w2) = rhs.eval(t + 0.5 * h, &axpy(&s, 0.5 * h, &v1, &w1));
        let (v3, w3) = rhs.eval(t + 0.5 * h, &axpy(&s, 0.5 * h, &v2, &w2));
        let (v4, w4) = rhs.eval(t + h, &axpy(&s, h, &v3, &w3));
        for i in 0..s.v.len() {
            s.v[i] += (v1[i] + v2[i] * 2.0 + v3[i] * 2.0 + v4[i]) * (h / 6.0);
            s.w[i] += (w1[i] + w2[i] * 2.0 + w3[i] * 2.0 + w4[i]) * (h / 6.0);
        }
        let e = s.energy();
        if !e.is_finite() || (uncoupled && e > 10.0 * e0) {
            return Err(Error::Instability { t: t + h });
        }
        observer(t + h, &s);
    }
    Ok(s)
}

/// `||D V(t)||^2` for `D = d0 d_t + d1 Lambda`, taken on the collocation grid.
pub fn observed_energy(obs: &MatrixSymbol, s: &SpectralState, t: f64) -> Result<f64> {
    if obs.cols() != s.n {
        return Err(Error::DimensionMismatch("observation does not match the state".into()));
    }
    let col = Collocation::new(s.modes);
    Ok(observed_energy_on(&col, obs, s, t))
}

fn observed_energy_on(col: &Collocation, obs: &MatrixSymbol, s: &SpectralState, t: f64) -> f64 {
    let m = ManifoldModel::circle(2.0 * PI).expect("valid period");
    let wd = s.width();
    let wg: Vec<Vec<C64>> = (0..s.n).map(|c| col.to_grid(&s.w[c * wd..(c + 1) * wd])).collect();
    let lv: Vec<C64> = s.v.iter().enumerate().map(|(i, v)| v * japanese(s.wavenumber(i % wd))).collect();
    let lg: Vec<Vec<C64>> = (0..s.n).map(|c| col.to_grid(&lv[c * wd..(c + 1) * wd])).collect();
    let mut total = 0.0;
    for (j, &x) in col.x.iter().enumerate() {
        let d0 = obs.eval_order0(&m, t, &[x]);
        let d1 = obs.eval_order1(&m, t, &[x]);
        for r in 0..obs.rows() {
            let val: C64 = (0..s.n).map(|c| d0[(r, c)] * wg[c][j] + d1[(r, c)] * lg[c][j]).sum();
            total += val.norm_sqr();
        }
    }
    total * 2.0 * PI / col.g as f64
}

/// Gaussian beam at frequency `k` concentrated at `rho0`, mapped to data
/// whose `+` half-wave vanishes and whose `-` half-wave is `P v`.
#[derive(Debug, Clone)]
pub struct WavePacket {
    /// Scalar packet `v` with `||v||_{L^2} = 1`.
    pub profile: Vec<C64>,
    pub state: SpectralState,
}

/// Smooth cut-off radii of the packet around its centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketCutoff {
    pub r_in: f64,
    pub r_out: f64,
}

impl Default for PacketCutoff {
    fn default() -> Self {
        PacketCutoff { r_in: 0.5 * PI, r_out: 0.9 * PI }
    }
}

pub fn wavepacket_data(
    rho0: &PhasePoint,
    k: usize,
    polarization: &DVector<C64>,
    cutoff: PacketCutoff,
    modes: usize,
) -> Result<WavePacket> {
    let circle = ManifoldModel::circle(2.0 * PI)?;
    circle.validate(rho0)?;
    if k < 8 {
        return Err(Error::Degenerate(format!("packet frequency {k} below 8")));
    }
    if modes < 4 * k {
        return Err(Error::CutoffTooSmall { modes, k });
    }
    let pn = polarization.norm();
    if !(pn > 0.0) {
        return Err(Error::Degenerate("zero polarization".into()));
    }
    let (y0, eta) = (rho0.x()[0], rho0.xi()[0]);
    let col = Collocation::new(modes);
    let kf = k as f64;
    let vals: Vec<C64> = col
        .x
        .iter()
        .map(|&y| {
            let d = wrap_centered(y - y0, 2.0 * PI);
            let amp = (-kf * d * d).exp() * bump_profile(d.abs(), cutoff.r_in, cutoff.r_out);
            C64::from_polar(amp, kf * eta * y)
        })
        .collect();
    let mut profile = col.to_coef(vals);
    let norm = hs_norm_sq(&profile, 0.0).sqrt();
    profile.iter_mut().for_each(|z| *z /= norm);
    let n = polarization.len();
    let p = polarization / C64::from(pn);
    let wd = 2 * modes + 1;
    let plus = vec![C64::new(0.0, 0.0); n * wd];
    let mut minus = vec![C64::new(0.0, 0.0); n * wd];
    for c in 0..n {
        for i in 0..wd {
            minus[c * wd + i] = p[c] * profile[i];
        }
    }
    Ok(WavePacket { state: halfwave_inverse(n, modes, &plus, &minus), profile })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioConfig {
    pub modes: usize,
    pub dt: f64,
    pub cutoff: PacketCutoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolRatio {
    pub ratio: f64,
    pub observed: f64,
    pub predicted: f64,
}

/// Ratio of the observed energy of a high-frequency packet to the value
/// predicted by the `-` branch Gramian, `P* G P`.
///
/// The scenario coupling `L = A0 d_t + A1` enters the solver as
/// `B0 = A0`, `B1 = A1 - I`.
pub fn symbol_ratio(
    sc: &ObservabilityScenario,
    rho0: &PhasePoint,
    polarization: &DVector<C64>,
    horizon: f64,
    k: usize,
    cfg: RatioConfig,
) -> Result<SymbolRatio> {
    check_circle(&sc.manifold)?;
    if polarization.len() != sc.n {
        return Err(Error::DimensionMismatch("polarization length".into()));
    }
    let p = polarization / C64::from(polarization.norm());
    let g = branch_gramian(sc, rho0, Branch::Minus, horizon)?;
    let predicted = (p.adjoint() * &g.matrix * &p)[(0, 0)].re;
    if predicted < 1e-12 {
        return Err(Error::DegenerateDenominator { value: predicted });
    }
    let packet = wavepacket_data(rho0, k, &p, cfg.cutoff, cfg.modes)?;
    let coupling = KgCoupling { symbol: sc.coupling.clone(), potential: -CMat::identity(sc.n, sc.n) };
    let col = Collocation::new(cfg.modes);
    let mut samples = Vec::new();
    evolve(&packet.state, &coupling, horizon, cfg.dt, &mut |t, s| {
        samples.push(observed_energy_on(&col, &sc.observation, s, t));
    })?;
    let n = samples.len() - 1;
    let w = simpson_weights(n, horizon / n as f64);
    let observed: f64 = samples.iter().zip(&w).map(|(a, b)| a * b).sum();
    Ok(SymbolRatio { ratio: observed / predicted, observed, predicted })
}

#[derive(Debug, Clone, PartialEq)]
pub enum UcpStatus {
    NoViolationFound,
    /// An eigenfunction (given by its nonzero modes) that is nearly unobserved.
    PossibleViolation { eigenvalue: C64, modes: Vec<(i64, DVector<C64>)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcpScan {
    pub status: UcpStatus,
    /// Smallest `||chi B* v|| / ||v||` over all eigenspaces.
    pub min_residual: f64,
    pub eigenspaces: usize,
}

/// Nonzero Fourier modes of an eigenfunction.
type ModeList = Vec<(i64, DVector<C64>)>;

/// Residual threshold below which an eigenfunction is flagged.
pub const UCP_RESIDUAL: f64 = 1e-6;

/// Searches the eigenfunctions of `-Lap + A*` with `|k| <= M` for ones that
/// `chi_omega B*` nearly annihilates. Each eigenspace is scanned for its
/// least observed member, not only for a basis.
pub fn discrete_ucp(a: &CMat, b: &CMat, omega: &ScalarField, modes: usize) -> Result<UcpScan> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch("A must be N x N and B N x K".into()));
    }
    let circle = ManifoldModel::circle(2.0 * PI)?;
    omega.check(&circle)?;
    let ast = a.adjoint();
    let m = modes as i64;
    let block = |k: i64| CMat::identity(n, n) * C64::from((k * k) as f64) + &ast;
    let mut eig: Vec<(i64, C64)> = Vec::new();
    for k in -m..=m {
        for lam in eigenvalues(&block(k))? {
            eig.push((k, lam));
        }
    }
    let g = (8 * modes).max(256);
    let xs: Vec<f64> = (0..g).map(|j| 2.0 * PI * j as f64 / g as f64).collect();
    let chi2: Vec<f64> = xs.iter().map(|&x| omega.eval(&circle, 0.0, &[x]).norm_sqr()).collect();
    let bst = b.adjoint();
    let mut used = vec![false; eig.len()];
    let mut best: Option<(f64, C64, ModeList)> = None;
    let mut spaces = 0;
    for i in 0..eig.len() {
        if used[i] {
            continue;
        }
        let lam = eig[i].1;
        let tol = 1e-8 * (1.0 + lam.norm());
        let mut ks: Vec<i64> = Vec::new();
        for (j, &(k, mu)) in eig.iter().enumerate() {
            if !used[j] && (mu - lam).norm() <= tol {
                used[j] = true;
                if !ks.contains(&k) {
                    ks.push(k);
                }
            }
        }
        spaces += 1;
        let mut basis: Vec<(i64, DVector<C64>)> = Vec::new();
        for &k in &ks {
            let h = block(k) - CMat::identity(n, n) * lam;
            let scale = 1.0 + crate::linalg::norm2(&h);
            let ns = null_space(&h, 1e-7 * scale);
            for c in 0..ns.ncols() {
                basis.push((k, ns.column(c).into_owned()));
            }
        }
        if basis.is_empty() {
            continue;
        }
        let r = basis.len();
        let bw: Vec<DVector<C64>> = basis.iter().map(|(_, w)| &bst * w).collect();
        let mut s = CMat::zeros(r, r);
        for p in 0..r {
            for q in 0..r {
                let dk = (basis[q].0 - basis[p].0) as f64;
                let f: C64 = xs
                    .iter()
                    .zip(&chi2)
                    .map(|(&x, &c2)| C64::from_polar(c2, dk * x))
                    .sum::<C64>()
                    * (2.0 * PI / g as f64);
                s[(p, q)] = f * bw[p].dotc(&bw[q]);
            }
        }
        let (vals, vecs) = hermitian_eigen(&(s / C64::from(2.0 * PI)));
        let res = vals[0].max(0.0).sqrt();
        if best.as_ref().is_none_or(|b| res < b.0) {
            let coeffs = vecs.column(0);
            let modes = basis.iter().zip(coeffs.iter()).map(|((k, w), c)| (*k, w * *c)).collect();
            best = Some((res, lam, modes));
        }
    }
    let (min_residual, lam, modes) = best.ok_or_else(|| Error::Numerical("no eigenvectors found".into()))?;
    let status = if min_residual < UCP_RESIDUAL {
        UcpStatus::PossibleViolation { eigenvalue: lam, modes }
    } else {
        UcpStatus::NoViolationFound
    };
    Ok(UcpScan { status, min_residual, eigenspaces: spaces })
}
