//! Subcommand pipelines. Each returns the `result` object of the report.

use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use waveobs_core::cascade::{cascade_gramian_equiv, t_omega_o_omega, CascadePair, NONZERO_REL};
use waveobs_core::linalg::{to_complex, RMat, C64, POSITIVE_REL, RANK_REL, SINGULAR_REL};
use waveobs_core::ltv_control::{hautus_check, kalman_rank};
use waveobs_core::normal_forms::{brunovsky, subdiagonal_decomposition, ucp_precheck, UcpAssumption};
use waveobs_core::observability::{branch_gramian, kappa_with, ObsReport, ObservabilityScenario};
use waveobs_core::phase_flow::{sample_cosphere, Branch, ManifoldModel, PhasePoint};
use waveobs_core::spectral::{discrete_ucp, symbol_ratio, PacketCutoff, RatioConfig, UcpStatus, UCP_RESIDUAL};
use waveobs_core::Error;

use crate::report::{self, cmat, complex, num, point, rmat, verdict, Row};
use crate::scenario::{ScenarioFile, TMIN_DEFAULT};
use crate::{Cli, CliError, Command, Pool};

const DECOMPOSE_TOL: f64 = 1e-10;

struct Ctx<'a> {
    file: ScenarioFile,
    horizon: f64,
    tol: Option<f64>,
    pool: Pool,
    csv: Option<&'a Path>,
    /// Tolerances actually used, copied into the report metadata.
    tolerances: Map<String, Value>,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let bytes = std::fs::read(&cli.scenario)
        .map_err(|e| CliError::Scenario(format!("reading {}: {e}", cli.scenario.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Scenario(format!("scenario is not UTF-8: {e}")))?;
    let file = ScenarioFile::parse(text)?;
    let horizon = cli.horizon.unwrap_or(file.run.t);
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(CliError::Scenario(format!("horizon must be positive, got {horizon}")));
    }
    if let Some(t) = cli.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::Scenario(format!("--tol must be positive, got {t}")));
        }
    }
    let mut tolerances = Map::new();
    tolerances.insert("positive_rel".into(), num(POSITIVE_REL));
    tolerances.insert("singular_rel".into(), num(SINGULAR_REL));
    tolerances.insert("rank_rel".into(), num(RANK_REL));
    let mut ctx = Ctx { file, horizon, tol: cli.tol, pool: Pool::new(cli.threads)?, csv: cli.csv.as_deref(), tolerances };
    let result = match cli.command {
        Command::Gramian => gramian_cmd(&mut ctx)?,
        Command::Kappa => kappa_cmd(&mut ctx)?,
        Command::Tcrit => tcrit_cmd(&mut ctx)?,
        Command::Brunovsky => brunovsky_cmd(&mut ctx)?,
        Command::Decompose => decompose_cmd(&mut ctx)?,
        Command::Cascade => cascade_cmd(&mut ctx)?,
        Command::Validate => validate_cmd(&mut ctx)?,
    };
    let run = &ctx.file.run;
    let mut meta = Map::new();
    meta.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
    meta.insert("command".into(), json!(cli.command.name()));
    meta.insert("scenario_sha256".into(), json!(report::scenario_hash(&bytes)));
    meta.insert("horizon".into(), num(horizon));
    meta.insert("seed".into(), json!(run.seed));
    meta.insert(
        "grid".into(),
        json!({
            "n_x": run.n_x,
            "n_dir": run.n_dir,
            "n_steps": run.n_steps,
            "refine": run.refine.unwrap_or(true),
            "T_max": num(run.t_max),
        }),
    );
    meta.insert("tolerances".into(), Value::Object(ctx.tolerances));
    report::write_report(cli.out.as_deref(), &report::document(meta, result))
}

fn core(e: Error) -> CliError {
    CliError::from_core(e)
}

fn dim(m: &ManifoldModel) -> usize {
    m.coord_len()
}

fn rows_of(r: &ObsReport) -> Vec<Row> {
    r.per_point.iter().map(|p| Row { point: p.point, branch: p.branch, min_eig: p.min_eig }).collect()
}

fn maybe_csv(ctx: &Ctx, m: &ManifoldModel, rows: &[Row]) -> Result<(), CliError> {
    match ctx.csv {
        Some(p) => report::write_csv(p, dim(m), rows),
        None => Ok(()),
    }
}

fn gramian_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let mut sc = ctx.file.build()?;
    sc.sampling.refine = false;
    let r = kappa_with(&sc, ctx.horizon, &ctx.pool).map_err(core)?;
    let g = branch_gramian(&sc, &r.worst_point, r.worst_branch, ctx.horizon).map_err(core)?;
    maybe_csv(ctx, &sc.manifold, &rows_of(&r))?;
    Ok(json!({
        "min_eig": num(r.raw_min_eig),
        "scale": num(r.scale),
        "verdict": verdict(r.verdict),
        "rows": r.per_point.len(),
        "mirrored": r.mirrored,
        "worst": {
            "point": point(&r.worst_point),
            "branch": r.worst_branch.as_str(),
            "gramian": cmat(&g.matrix),
            "eigenvalues": g.eigenvalues.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "norm": num(g.norm),
            "verdict": verdict(g.verdict),
        },
    }))
}

fn kappa_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let sc = ctx.file.build()?;
    let r = kappa_with(&sc, ctx.horizon, &ctx.pool).map_err(core)?;
    maybe_csv(ctx, &sc.manifold, &rows_of(&r))?;
    let refined = r.per_point.iter().filter(|p| p.origin == waveobs_core::observability::Origin::Refined).count();
    Ok(json!({
        "kappa": num(r.kappa),
        "raw_min_eig": num(r.raw_min_eig),
        "c_obs": num(r.c_obs),
        "scale": num(r.scale),
        "verdict": verdict(r.verdict),
        "mirrored": r.mirrored,
        "rows": r.per_point.len(),
        "refined_rows": refined,
        "worst": {
            "point": point(&r.worst_point),
            "branch": r.worst_branch.as_str(),
            "eigvec": r.worst_eigvec.iter().map(|&z| complex(z)).collect::<Vec<_>>(),
        },
    }))
}

fn tcrit_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let sc = ctx.file.build()?;
    let t_lo = ctx.file.run.t_min.unwrap_or(TMIN_DEFAULT);
    let t_hi = ctx.file.run.t_max;
    let tol = ctx.tol.unwrap_or(ctx.file.run.tol);
    ctx.tolerances.insert("tol_T".into(), num(tol));
    match waveobs_core::observability::t_crit_with(&sc, t_lo, t_hi, tol, &ctx.pool) {
        Ok(tc) => {
            if ctx.csv.is_some() {
                let mut plain = sc.clone();
                plain.sampling.refine = false;
                let r = kappa_with(&plain, tc.hi, &ctx.pool).map_err(core)?;
                maybe_csv(ctx, &sc.manifold, &rows_of(&r))?;
            }
            Ok(json!({
                "found": true,
                "t_crit": num(tc.value),
                "bracket": [num(tc.lo), num(tc.hi)],
                "at_lower_edge": tc.at_lower_edge,
                "search": [num(t_lo), num(t_hi)],
            }))
        }
        Err(Error::NotFound { t_hi }) => Ok(json!({
            "found": false,
            "search": [num(t_lo), num(t_hi)],
        })),
        Err(e) => Err(core(e)),
    }
}

fn brunovsky_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let (a, b) = ctx.file.constant_pair()?;
    let kal = kalman_rank(&a, &b).map_err(core)?;
    let hautus = hautus_check(&a, &b).map_err(core)?;
    let algebra = json!({
        "kalman_rank": kal.rank,
        "kalman_controllable": kal.controllable,
        "hautus_controllable": hautus.controllable,
        "hautus_failing_eigenvalue": hautus.failing_eigenvalue.map(complex),
    });
    let ucp = match ctx.file.omega()? {
        Some(omega) => {
            let m = ctx.file.manifold()?;
            let v = ucp_precheck(&m, &a, &b, &omega, None, ctx.file.run.n_x).map_err(core)?;
            json!({
                "kalman_transposed": v.kalman_transposed,
                "distinct_eigenvalues": v.distinct_eigenvalues,
                "domains_intersect": v.domains_intersect,
                "sign_condition_beta": format!("{:?}", v.sign_condition_beta),
                "assumption": match v.assumption {
                    UcpAssumption::One => "one",
                    UcpAssumption::Two => "two",
                    UcpAssumption::None => "none",
                },
            })
        }
        None => Value::Null,
    };
    let form = match brunovsky(&a, &b) {
        Ok(f) => {
            let path: Result<Vec<Value>, CliError> = [0.0, 0.5, 1.0]
                .iter()
                .map(|&t| Ok(json!({ "t": num(t), "A_t": rmat(&f.a_t(&a, &b, t).map_err(core)?) })))
                .collect();
            json!({
                "blocks": f.blocks,
                "Q": rmat(&f.q),
                "F": rmat(&f.f),
                "M_u": rmat(&f.m_u),
                "A_tilde": rmat(&f.a_tilde),
                "B_tilde": rmat(&f.b_tilde),
                "residual_a": num(f.residual_a),
                "residual_b": num(f.residual_b),
                "path": path?,
            })
        }
        Err(Error::NotControllable { .. }) => Value::Null,
        Err(e) => return Err(core(e)),
    };
    Ok(json!({ "controllable": kal.controllable, "algebra": algebra, "form": form, "ucp_precheck": ucp }))
}

fn real_part(m: &nalgebra::DMatrix<C64>, name: &str) -> Result<RMat, CliError> {
    if m.iter().any(|z| z.im != 0.0) {
        return Err(CliError::Scenario(format!("symbols.{name} must be real for this command")));
    }
    Ok(m.map(|z| z.re))
}

fn decompose_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let m = ctx.file.manifold()?;
    let z = ctx.file.zero_order(&m)?;
    if z.a.iter().chain(&z.b).any(|f| !f.is_time_independent()) {
        return Err(CliError::Scenario("decompose needs time-independent A and B".into()));
    }
    let base = sample_cosphere(&m, ctx.file.run.n_x, 1).map_err(core)?;
    let mut a_s = Vec::with_capacity(base.len());
    let mut b_s = Vec::with_capacity(base.len());
    for p in &base {
        a_s.push(real_part(&z.eval_a(&m, p.x()), "A")?);
        b_s.push(real_part(&z.eval_b(&m, p.x()), "B")?);
    }
    let tol = ctx.tol.unwrap_or(DECOMPOSE_TOL);
    ctx.tolerances.insert("decompose_rel".into(), num(tol));
    let d = subdiagonal_decomposition(&a_s, &b_s, tol).map_err(core)?;
    Ok(json!({
        "blocks": d.blocks,
        "levels": d.k,
        "reachable": d.reachable,
        "change_of_basis": rmat(&d.change_of_basis),
        "samples": base.len(),
    }))
}

fn cascade_pair(file: &ScenarioFile) -> Result<CascadePair, CliError> {
    let m = file.manifold()?;
    let z = file.zero_order(&m)?;
    let shape_ok = z.n == 2
        && z.k == 1
        && [&z.a[0], &z.a[1], &z.a[3], &z.b[1]].iter().all(|f| f.is_zero());
    if !shape_ok {
        return Err(CliError::Scenario(
            "cascade needs N = 2, K = 1, A = [[0, 0], [a, 0]] and B = [[b], [0]]".into(),
        ));
    }
    // The lifted drift is A_sub / 2, the cascade drift is -beta / 2.
    let beta = z.a[2].clone().scaled(C64::new(-1.0, 0.0));
    Ok(CascadePair { manifold: m, alpha: z.b[0].clone(), beta })
}

fn cascade_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let pair = cascade_pair(&ctx.file)?;
    let run = &ctx.file.run;
    let points = sample_cosphere(&pair.manifold, run.n_x, run.n_dir).map_err(core)?;
    let (horizon, n_steps) = (ctx.horizon, run.n_steps);
    let per = ctx.pool.0.install(|| {
        points
            .par_iter()
            .map(|p| cascade_gramian_equiv(&pair, p, horizon, n_steps, n_steps))
            .collect::<Result<Vec<_>, _>>()
    });
    let per = per.map_err(core)?;
    ctx.tolerances.insert("nonzero_rel".into(), num(NONZERO_REL));
    let rows: Vec<Row> = points
        .iter()
        .zip(&per)
        .map(|(p, e)| Row { point: *p, branch: Branch::Minus, min_eig: e.gramian.min_eig })
        .collect();
    maybe_csv(ctx, &pair.manifold, &rows)?;
    let disagreements: Vec<Value> = points
        .iter()
        .zip(&per)
        .filter(|(_, e)| !e.agree)
        .map(|(p, e)| json!({ "point": point(p), "condition": e.condition.holds, "gramian_positive": e.gramian_positive }))
        .collect();
    let region = if pair.alpha.is_time_independent() && pair.beta.is_time_independent() {
        let tol = ctx.tol.unwrap_or(run.tol);
        ctx.tolerances.insert("region_tol".into(), num(tol));
        let scan = run.t_max / n_steps as f64;
        match t_omega_o_omega(&pair.manifold, &pair.alpha, &pair.beta, run.n_x, run.n_dir, run.t_max, scan, tol) {
            Ok(r) => json!({ "found": true, "value": num(r.value), "worst_point": point(&r.worst_point) }),
            Err(Error::NotFound { .. }) => json!({ "found": false }),
            Err(e) => return Err(core(e)),
        }
    } else {
        Value::Null
    };
    Ok(json!({
        "rays": per.len(),
        "condition_everywhere": per.iter().all(|e| e.condition.holds),
        "gramian_positive_everywhere": per.iter().all(|e| e.gramian_positive),
        "all_agree": disagreements.is_empty(),
        "indeterminate_rays": per.iter().filter(|e| e.indeterminate).count(),
        "disagreements": disagreements,
        "min_gramian_eig": num(per.iter().map(|e| e.gramian.min_eig).fold(f64::INFINITY, f64::min)),
        "omega_o_omega_time": region,
    }))
}

fn validate_cmd(ctx: &mut Ctx) -> Result<Value, CliError> {
    let sc: ObservabilityScenario = ctx.file.build()?;
    if !matches!(&sc.manifold, ManifoldModel::FlatTorus { periods } if periods.len() == 1) {
        return Err(CliError::Scenario("validate runs on the circle only".into()));
    }
    let sect = ctx.file.spectral.clone().unwrap_or_default();
    let omega = ctx.file.omega()?;
    let x0 = sect.x0.or_else(|| ctx.file.omega.as_ref().map(|o| o.center[0])).unwrap_or(0.0);
    let rho = PhasePoint::new(&[x0], &[sect.xi0.unwrap_or(1.0)]).map_err(core)?;
    let p = match &sect.polarization {
        Some(v) if v.len() == sc.n => DVector::from_iterator(sc.n, v.iter().map(|z| C64::new(z[0], z[1]))),
        Some(_) => return Err(CliError::Scenario("spectral.polarization needs one entry per component".into())),
        None => DVector::from_fn(sc.n, |i, _| C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)),
    };
    let cfg = RatioConfig {
        modes: sect.modes.unwrap_or(256),
        dt: sect.dt.unwrap_or(1e-3),
        cutoff: PacketCutoff::default(),
    };
    let ks = sect.k.clone().unwrap_or_else(|| vec![16, 32, 64]);
    let mut ratios = Vec::with_capacity(ks.len());
    let mut errors = Vec::with_capacity(ks.len());
    for &k in &ks {
        let r = symbol_ratio(&sc, &rho, &p, ctx.horizon, k, cfg).map_err(core)?;
        errors.push((r.ratio - 1.0).abs());
        ratios.push(json!({
            "k": k,
            "ratio": num(r.ratio),
            "observed": num(r.observed),
            "predicted": num(r.predicted),
            "error": num((r.ratio - 1.0).abs()),
        }));
    }
    let ucp = match (omega, ctx.file.constant_pair()) {
        (Some(omega), Ok((a, b))) => {
            let modes = sect.ucp_modes.unwrap_or(64);
            ctx.tolerances.insert("ucp_residual".into(), num(UCP_RESIDUAL));
            let scan = discrete_ucp(&to_complex(&a), &to_complex(&b), &omega, modes).map_err(core)?;
            let (status, eig) = match &scan.status {
                UcpStatus::NoViolationFound => ("no_violation_found", Value::Null),
                UcpStatus::PossibleViolation { eigenvalue, .. } => ("possible_violation", complex(*eigenvalue)),
            };
            json!({
                "modes": modes,
                "status": status,
                "eigenvalue": eig,
                "min_residual": num(scan.min_residual),
                "eigenspaces": scan.eigenspaces,
            })
        }
        _ => Value::Null,
    };
    Ok(json!({
        "ray": point(&rho),
        "modes": cfg.modes,
        "dt": num(cfg.dt),
        "ratios": ratios,
        "monotone": errors.windows(2).all(|w| w[1] < w[0]),
        "final_error": errors.last().map_or(Value::Null, |&e| num(e)),
        "ucp": ucp,
    }))
}
