//! Scenario files: TOML schema and conversion into core types.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use waveobs_core::linalg::{RMat, C64};
use waveobs_core::observability::{ObservabilityScenario, Sampling};
use waveobs_core::phase_flow::ManifoldModel;
use waveobs_core::symbols::{
    bump_indicator, FreqTerm, MatrixSymbol, PolyTerm, ScalarField, Spatial, TimeFactor, TrigTerm, ZeroOrderCoupling,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub manifold: ManifoldSection,
    pub system: SystemSection,
    pub symbols: SymbolsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSection>,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManifoldKind {
    Torus,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSection {
    pub kind: ManifoldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    /// Torus side lengths; defaults to `2 pi` on every axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    First,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub order: Order,
    /// Block sizes of a zero-order system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<usize>>,
}

pub type FieldMatrix = Vec<Vec<Field>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<FieldMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<FieldMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<FieldMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<FieldMatrix>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<FieldMatrix>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<FieldMatrix>,
}

/// A scalar field entry: a real number, the name `"omega"`, or a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Field {
    Real(f64),
    Named(String),
    Table(FieldTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trig: Option<Vec<TrigEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<Vec<PolyEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<OmegaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<Vec<FreqEntry>>,
    /// Direction-dependent coefficients; recognised so they can be refused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigEntry {
    pub k: Vec<i32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyEntry {
    pub powers: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqEntry {
    pub omega: f64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSection {
    pub center: Vec<f64>,
    pub r_in: f64,
    pub r_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_min", default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    pub n_x: usize,
    pub n_dir: usize,
    pub n_steps: usize,
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    /// Base point and direction of the wavepacket ray.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi0: Option<f64>,
    /// Polarization as `[re, im]` pairs, one per component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ucp_modes: Option<usize>,
}

pub const TMIN_DEFAULT: f64 = 0.1;

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Scenario(msg.into())
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: ScenarioFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    fn check(&self) -> Result<(), CliError> {
        let r = &self.run;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(r.t) && pos(r.t_max) && pos(r.tol)) {
            return Err(bad("run.T, run.T_max and run.tol must be positive"));
        }
        if let Some(t) = r.t_min {
            if !(pos(t) && t < r.t_max) {
                return Err(bad("run.T_min must lie in (0, T_max)"));
            }
        }
        if r.n_x == 0 || r.n_dir == 0 {
            return Err(bad("run.n_x and run.n_dir must be at least 1"));
        }
        if r.n_steps < 8 || r.n_steps % 2 == 1 {
            return Err(bad("run.n_steps must be even and at least 8"));
        }
        if self.system.n == 0 || self.system.k == 0 {
            return Err(bad("system.N and system.K must be at least 1"));
        }
        let sym = &self.symbols;
        match self.system.order {
            Order::First => {
                if sym.a.is_some() || sym.b.is_some() || self.system.blocks.is_some() {
                    return Err(bad("A, B and blocks belong to zero-order systems"));
                }
                if sym.a0.is_none() || sym.d0.is_none() {
                    return Err(bad("first-order systems need symbols.a0 and symbols.d0"));
                }
            }
            Order::Zero => {
                if sym.a0.is_some() || sym.a1.is_some() || sym.d0.is_some() || sym.d1.is_some() {
                    return Err(bad("a0, a1, d0, d1 belong to first-order systems"));
                }
                if sym.a.is_none() || sym.b.is_none() || self.system.blocks.is_none() {
                    return Err(bad("zero-order systems need symbols.A, symbols.B and system.blocks"));
                }
            }
        }
        Ok(())
    }

    pub fn manifold(&self) -> Result<ManifoldModel, CliError> {
        let m = &self.manifold;
        match m.kind {
            ManifoldKind::Sphere => {
                if m.periods.is_some() || m.dims.is_some_and(|d| d != 2) {
                    return Err(bad("the sphere is 2-dimensional and has no periods"));
                }
                Ok(ManifoldModel::sphere())
            }
            ManifoldKind::Torus => {
                let periods = match (&m.periods, m.dims) {
                    (Some(p), Some(d)) if p.len() != d => {
                        return Err(bad(format!("dims = {d} but {} periods given", p.len())))
                    }
                    (Some(p), _) => p.clone(),
                    (None, Some(d)) => vec![2.0 * PI; d],
                    (None, None) => return Err(bad("torus needs dims or periods")),
                };
                ManifoldModel::torus(&periods).map_err(CliError::from_input)
            }
        }
    }

    fn omega_field(&self, m: &ManifoldModel) -> Result<Option<ScalarField>, CliError> {
        self.omega
            .as_ref()
            .map(|o| bump_indicator(m, &o.center, o.r_in, o.r_out).map_err(CliError::from_input))
            .transpose()
    }

    /// The observation region as a scalar field, if declared.
    pub fn omega(&self) -> Result<Option<ScalarField>, CliError> {
        self.omega_field(&self.manifold()?)
    }

    fn matrix(
        &self,
        m: &ManifoldModel,
        name: &str,
        entries: Option<&FieldMatrix>,
        rows: usize,
        cols: usize,
    ) -> Result<Vec<ScalarField>, CliError> {
        let Some(entries) = entries else {
            return Ok(vec![ScalarField::zero(); rows * cols]);
        };
        if entries.len() != rows || entries.iter().any(|r| r.len() != cols) {
            return Err(bad(format!("symbols.{name} must be {rows}x{cols}")));
        }
        let omega = self.omega_field(m)?;
        entries
            .iter()
            .flatten()
            .map(|f| field(f, m, omega.as_ref()).map_err(|e| prefix(name, e)))
            .collect()
    }

    /// Builds the observability scenario.
    pub fn build(&self) -> Result<ObservabilityScenario, CliError> {
        let m = self.manifold()?;
        let (n, k) = (self.system.n, self.system.k);
        let sampling = Sampling { n_x: self.run.n_x, n_dir: self.run.n_dir, refine: self.run.refine.unwrap_or(true) };
        let sym = &self.symbols;
        let sc = match self.system.order {
            Order::First => {
                let a = MatrixSymbol::new(
                    &m,
                    n,
                    n,
                    self.matrix(&m, "a0", sym.a0.as_ref(), n, n)?,
                    self.matrix(&m, "a1", sym.a1.as_ref(), n, n)?,
                )
                .map_err(CliError::from_input)?;
                let d = MatrixSymbol::new(
                    &m,
                    k,
                    n,
                    self.matrix(&m, "d0", sym.d0.as_ref(), k, n)?,
                    self.matrix(&m, "d1", sym.d1.as_ref(), k, n)?,
                )
                .map_err(CliError::from_input)?;
                ObservabilityScenario::new(m, a, d, self.run.t_max, sampling, self.run.n_steps)
            }
            Order::Zero => {
                let z = self.zero_order(&m)?;
                ObservabilityScenario::from_zero_order(m, &z, self.run.t_max, sampling, self.run.n_steps)
            }
        };
        sc.map_err(CliError::from_input)
    }

    pub fn zero_order(&self, m: &ManifoldModel) -> Result<ZeroOrderCoupling, CliError> {
        if self.system.order != Order::Zero {
            return Err(bad("this command needs a zero-order system (symbols.A, symbols.B)"));
        }
        let (n, k) = (self.system.n, self.system.k);
        Ok(ZeroOrderCoupling {
            n,
            k,
            a: self.matrix(m, "A", self.symbols.a.as_ref(), n, n)?,
            b: self.matrix(m, "B", self.symbols.b.as_ref(), n, k)?,
            block_sizes: self.system.blocks.clone().unwrap_or_default(),
        })
    }

    /// Constant real `A` and `B` of a zero-order system.
    pub fn constant_pair(&self) -> Result<(RMat, RMat), CliError> {
        let m = self.manifold()?;
        let z = self.zero_order(&m)?;
        let konst = |fs: &[ScalarField], rows: usize, cols: usize, name: &str| -> Result<RMat, CliError> {
            let mut out = RMat::zeros(rows, cols);
            for (i, f) in fs.iter().enumerate() {
                let v = match (&f.spatial, &f.time) {
                    (Spatial::Constant(c), None) => *c,
                    _ if f.is_zero() => C64::new(0.0, 0.0),
                    _ => return Err(bad(format!("symbols.{name} must have constant entries for this command"))),
                };
                if v.im != 0.0 {
                    return Err(bad(format!("symbols.{name} must be real for this command")));
                }
                out[(i / cols, i % cols)] = v.re;
            }
            Ok(out)
        };
        Ok((konst(&z.a, z.n, z.n, "A")?, konst(&z.b, z.n, z.k, "B")?))
    }
}

fn prefix(name: &str, e: CliError) -> CliError {
    match e {
        CliError::Scenario(s) => CliError::Scenario(format!("symbols.{name}: {s}")),
        other => other,
    }
}

fn field(f: &Field, m: &ManifoldModel, omega: Option<&ScalarField>) -> Result<ScalarField, CliError> {
    let tab = match f {
        Field::Real(r) => return Ok(ScalarField::real(*r)),
        Field::Named(name) if name == "omega" => {
            return omega.cloned().ok_or_else(|| bad("\"omega\" used without an [omega] section"))
        }
        Field::Named(name) => return Err(bad(format!("unknown field name {name:?}"))),
        Field::Table(s) => s,
    };
    if tab.direction.is_some() {
        return Err(CliError::from_input(waveobs_core::Error::NotSupported(
            "direction-dependent symbol entries".into(),
        )));
    }
    let constant = tab.re.is_some() || tab.im.is_some();
    let kinds = [constant, tab.trig.is_some(), tab.poly.is_some(), tab.bump.is_some()];
    if kinds.iter().filter(|&&b| b).count() > 1 {
        return Err(bad("a field takes one of re/im, trig, poly or bump"));
    }
    let mut out = if let Some(terms) = &tab.trig {
        let mut v = Vec::with_capacity(terms.len());
        for t in terms {
            if t.k.is_empty() || t.k.len() > 2 {
                return Err(bad("trig wave vectors have 1 or 2 entries"));
            }
            let mut k = [0; 2];
            k[..t.k.len()].copy_from_slice(&t.k);
            v.push(TrigTerm { k, coef: C64::new(t.re, t.im) });
        }
        ScalarField::trig(v)
    } else if let Some(terms) = &tab.poly {
        let mut v = Vec::with_capacity(terms.len());
        for t in terms {
            if t.powers.is_empty() || t.powers.len() > 3 {
                return Err(bad("poly powers have 1 to 3 entries"));
            }
            let mut p = [0; 3];
            p[..t.powers.len()].copy_from_slice(&t.powers);
            v.push(PolyTerm { powers: p, coef: C64::new(t.re, t.im) });
        }
        ScalarField::poly(v)
    } else if let Some(b) = &tab.bump {
        bump_indicator(m, &b.center, b.r_in, b.r_out).map_err(CliError::from_input)?
    } else {
        ScalarField::constant(C64::new(tab.re.unwrap_or(0.0), tab.im.unwrap_or(0.0)))
    };
    if let Some(terms) = &tab.time {
        out = out.with_time(TimeFactor::TrigPoly(
            terms.iter().map(|t| FreqTerm { omega: t.omega, coef: C64::new(t.re, t.im) }).collect(),
        ));
    }
    out.check(m).map_err(CliError::from_input)?;
    Ok(out)
}
