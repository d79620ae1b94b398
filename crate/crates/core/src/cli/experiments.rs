//! One function per experiment; each writes its artifacts and returns the
//! content of `summary.json`.

use std::f64::consts::PI;

use serde_json::json;

use crate::carleman::scan_all;
use crate::error::{Error, Result};
use crate::forward::{convergence_study, solve_forward, ForwardProblem, ManufacturedFamily, RefinementAxis};
use crate::inverse::{
    assemble_forward_map, diffusion_basis, invert_diffusion_coefficient, invert_source, invert_zeroth_coefficient,
    solve_lifted, source_basis, transversality, InversionResult, ObservationSet,
};
use crate::model::{EllipticCoefficients, Grid, ModelParams, SpaceTime};
use crate::stability::{run_stability_ensemble, Driver, Unknown};
use crate::transform::{diffusion_expansion_ftilde, source_expansion_f, transform_with_residual};

use super::config::{Experiment, InvertCoefficientConfig};
use super::output::{fmt_f64, fmt_opt, OutputDir};
use super::schema;
use super::{CliError, Resolved};

pub fn execute(experiment: Experiment, r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    match experiment {
        Experiment::Forward => forward(r, out),
        Experiment::Convergence => convergence(r, out),
        Experiment::TransformCheck => transform_check(r, out),
        Experiment::CarlemanScan => carleman(r, out),
        Experiment::InvertSource => invert_source_exp(r, out),
        Experiment::InvertZeroth => invert_coefficient(r, out, Unknown::Zeroth),
        Experiment::InvertDiffusion => invert_coefficient(r, out, Unknown::Diffusion),
        Experiment::Stability => stability(r, out),
    }
}

/// `u* = t^2 sin(pi x)` with the source induced by the configured model
/// and coefficients (`a'` by central differences of the expression).
struct ConfiguredSine<'a> {
    resolved: &'a Resolved,
}

const SLOPE_STEP: f64 = 1e-5;

impl ConfiguredSine<'_> {
    fn coeffs(&self, grid: &Grid) -> Result<EllipticCoefficients> {
        self.resolved.coeffs(grid).map_err(|e| Error::Data(e.message))
    }

    fn source(&self, grid: Grid) -> Result<SpaceTime> {
        let ModelParams { rho1, rho2, .. } = self.resolved.params;
        let coeffs = self.coeffs(&grid)?;
        let a = self.resolved.coefficient_expr(0);
        let mut spatial = Vec::with_capacity(grid.n_space());
        for (i, x) in grid.xs().into_iter().enumerate() {
            let da = (a.eval(x + SLOPE_STEP, 0.0).map_err(|e| Error::Data(e.to_string()))?
                - a.eval(x - SLOPE_STEP, 0.0).map_err(|e| Error::Data(e.to_string()))?)
                / (2.0 * SLOPE_STEP);
            let (s, ds, dds) = ((PI * x).sin(), PI * (PI * x).cos(), -PI * PI * (PI * x).sin());
            let l = coeffs.a[i] * dds + (da - coeffs.b[i]) * ds - coeffs.c[i] * s;
            spatial.push((s, l));
        }
        let half = 8.0 / (3.0 * PI.sqrt());
        let mut g = SpaceTime::zeros(grid);
        for n in 0..grid.n_time() {
            let t = grid.t(n);
            for (v, &(s, l)) in g.level_mut(n).iter_mut().zip(&spatial) {
                *v = (2.0 * rho1 * t + rho2 * half * t.powf(1.5)) * s - t * t * l;
            }
        }
        Ok(g)
    }
}

impl ManufacturedFamily for ConfiguredSine<'_> {
    fn problem(&self, grid: Grid) -> Result<ForwardProblem> {
        let params = self.resolved.params;
        let grid = grid.with_final_time(params.t_final)?;
        let stepping = self.resolved.config.forward.stepping;
        Ok(ForwardProblem::new(params, self.coeffs(&grid)?, grid, self.source(grid)?).with_stepping(stepping))
    }

    fn exact(&self, x: f64, t: f64) -> f64 {
        t * t * (PI * x).sin()
    }
}

fn forward(r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    let grid = r.grid;
    let cfg = &r.config.forward;
    let family = ConfiguredSine { resolved: r };
    let (problem, exact) = match &cfg.source {
        None => (family.problem(grid)?, Some(SpaceTime::from_fn(grid, |x, t| family.exact(x, t)))),
        Some(src) => {
            let g = r.expr("forward.source", src, true)?.sample_space_time(&grid).map_err(|e| CliError::config("forward.source", e))?;
            let exact = match &cfg.exact {
                Some(e) => Some(r.expr("forward.exact", e, true)?.sample_space_time(&grid).map_err(|e| CliError::config("forward.exact", e))?),
                None => None,
            };
            (ForwardProblem::new(r.params, r.coeffs(&grid)?, grid, g).with_stepping(cfg.stepping), exact)
        }
    };
    let u = solve_forward(&problem)?;
    let rows = (0..grid.n_time()).flat_map(|n| {
        let u = &u;
        (0..grid.n_space()).map(move |i| vec![fmt_f64(grid.t(n)), fmt_f64(grid.x(i)), fmt_f64(u.at(i, n))])
    });
    out.csv(schema::SOLUTION, rows)?;
    let max_error = exact.as_ref().map(|e| {
        e.values.iter().zip(&u.samples().values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    });
    let error = json!({
        "max_error": max_error,
        "exact": cfg.exact.clone().or_else(|| cfg.source.is_none().then(|| "t^2*sin(pi*x)".to_string())),
        "nx": grid.nx,
        "nt": grid.nt,
    });
    out.json("error.json", &error)?;
    Ok(json!({ "experiment": "forward", "max_error": max_error, "max_abs": u.samples().max_abs() }))
}

fn convergence(r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    let cfg = &r.config.convergence;
    let levels: Vec<(usize, usize)> = match cfg.axis {
        RefinementAxis::Time => cfg.levels.iter().map(|&nt| (cfg.fixed, nt)).collect(),
        RefinementAxis::Space => cfg.levels.iter().map(|&nx| (nx, cfg.fixed)).collect(),
    };
    let rows = convergence_study(&ConfiguredSine { resolved: r }, r.params.t_final, &levels, cfg.axis)?;
    out.csv(
        schema::CONVERGENCE,
        rows.iter().map(|row| {
            vec![
                row.nx.to_string(),
                row.nt.to_string(),
                fmt_f64(row.dx),
                fmt_f64(row.dt),
                fmt_f64(row.max_error),
                fmt_opt(row.order),
            ]
        }),
    )?;
    let orders: Vec<Option<f64>> = rows.iter().map(|r| r.order).collect();
    Ok(json!({ "experiment": "convergence", "axis": cfg.axis, "orders": orders }))
}

fn transform_check(r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    let cfg = &r.config.transform_check;
    let family = ConfiguredSine { resolved: r };
    let mut rows = Vec::new();
    let mut prev: Option<f64> = None;
    let mut residuals = Vec::new();
    for &nt in &cfg.nt_levels {
        let grid = Grid::new(r.grid.nx, nt, r.params.t_final).map_err(|e| CliError::config("transform_check.nt_levels", e))?;
        let problem = family.problem(grid)?;
        let u = solve_forward(&problem)?;
        let t = transform_with_residual(&u, &problem.source, &r.params, &problem.coeffs)?;
        let res = t.residual_norm.unwrap_or(f64::NAN);
        let ratio = prev.map(|p| p / res);
        rows.push(vec![nt.to_string(), fmt_f64(res), fmt_opt(ratio)]);
        residuals.push(json!({ "nt": nt, "residual": res, "ratio": ratio }));
        prev = Some(res);
    }
    out.csv(schema::TRANSFORM, rows)?;

    let nt = cfg.nt_levels.last().copied().unwrap_or(r.grid.nt);
    let grid = Grid::new(r.grid.nx, nt, r.params.t_final).map_err(|e| CliError::config("grid", e))?;
    let coeffs = r.coeffs(&grid)?;
    let sample = |path: &str, src: &str| -> std::result::Result<Vec<f64>, CliError> {
        r.expr(path, src, false)?.sample_space(&grid).map_err(|e| CliError::config(path, e))
    };
    let sample_st = |path: &str, src: &str| -> std::result::Result<SpaceTime, CliError> {
        r.expr(path, src, true)?.sample_space_time(&grid).map_err(|e| CliError::config(path, e))
    };
    let f = sample("transform_check.f", &cfg.f)?;
    let rf = sample_st("transform_check.r", &cfg.r)?;
    let fcheck = source_expansion_f(&f, &rf, &r.params, &coeffs)?;
    let a = sample("transform_check.a_diff", &cfg.a_diff)?;
    let rd = sample_st("transform_check.r_diff", &cfg.r_diff)?;
    let dcheck = diffusion_expansion_ftilde(&a, &rd, &r.params, &coeffs, &r.geometry)?;
    Ok(json!({
        "experiment": "transform-check",
        "residuals": residuals,
        "f_rel_discrepancy": fcheck.rel_discrepancy,
        "ftilde_rel_discrepancy": dcheck.rel_discrepancy,
        "expansion_nx": grid.nx,
        "expansion_nt": grid.nt,
    }))
}

fn carleman(r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    let cfg = &r.config.carleman_scan;
    let coeffs = |g: &Grid| -> Result<EllipticCoefficients> { r.coeffs(g).map_err(|e| Error::Data(e.message)) };
    let results = scan_all(&cfg.lemmas, &cfg.lambdas, &cfg.s_values, &r.params, &r.geometry, &coeffs, &cfg.resolution)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for res in &results {
        for (k, &s) in res.s_values.iter().enumerate() {
            rows.push(vec![
                res.lemma.name().to_string(),
                fmt_f64(res.lambda),
                fmt_f64(s),
                fmt_f64(res.lhs[k]),
                fmt_f64(res.rhs[k]),
                fmt_opt(res.ratios[k]),
            ]);
        }
        cells.push(json!({
            "lemma": res.lemma,
            "lambda": res.lambda,
            "all_finite": res.all_finite(),
            "tail_growth": res.tail_growth(),
            "red_flag": res.red_flag(),
            "descriptor": res.descriptor,
        }));
    }
    out.csv(schema::CARLEMAN, rows)?;
    Ok(json!({ "experiment": "carleman-scan", "cells": cells }))
}

fn read_observations(path: &std::path::Path, field: &str) -> std::result::Result<ObservationSet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(field, e))
}

fn write_estimate(
    out: &mut OutputDir,
    grid: &Grid,
    result: &InversionResult,
    truth: Option<&[f64]>,
) -> std::result::Result<(), CliError> {
    let rows = (0..grid.n_space()).map(|i| {
        vec![fmt_f64(grid.x(i)), fmt_f64(result.estimate[i]), truth.map(|t| fmt_f64(t[i])).unwrap_or_default()]
    });
    out.csv(schema::ESTIMATE, rows)?;
    out.json("inversion.json", result)
}

fn finish_inversion(
    result: InversionResult,
    truth: Option<&[f64]>,
    grid: &Grid,
) -> std::result::Result<InversionResult, CliError> {
    match truth {
        Some(t) => Ok(result.with_truth(t, grid.dx)?),
        None => Ok(result),
    }
}

fn invert_source_exp(r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    let cfg = &r.config.invert_source;
    let grid = r.grid;
    let coeffs = r.coeffs(&grid)?;
    let rfield = r.expr("invert_source.r", &cfg.r, true)?.sample_space_time(&grid).map_err(|e| CliError::config("invert_source.r", e))?;
    let basis = source_basis(&grid, cfg.kind, &r.geometry, cfg.basis_size)?;
    let map = assemble_forward_map(&rfield, &r.params, &coeffs, cfg.kind, &r.geometry, &basis)?;
    let truth = match &cfg.truth {
        Some(t) => Some(r.expr("invert_source.truth", t, false)?.sample_space(&grid).map_err(|e| CliError::config("invert_source.truth", e))?),
        None => None,
    };
    let obs = match (&cfg.observations, &truth) {
        (Some(path), _) => {
            let o = read_observations(path, "invert_source.observations")?;
            o.validate(&grid, &r.geometry)?;
            o
        }
        (None, Some(f)) => {
            let mut g = rfield.clone();
            for n in 0..grid.n_time() {
                for (v, fv) in g.level_mut(n).iter_mut().zip(f) {
                    *v *= fv;
                }
            }
            let u = solve_forward(&ForwardProblem::new(r.params, coeffs.clone(), grid, g))?;
            let o = ObservationSet::observe(u.samples(), &r.params, cfg.kind, &r.geometry)?;
            if cfg.noise_level > 0.0 { o.with_noise(cfg.noise_level, r.config.seed)? } else { o }
        }
        (None, None) => return Err(CliError::config("invert_source", "either truth or observations is required")),
    };
    out.json("observations.json", &obs)?;
    let result = finish_inversion(invert_source(&obs, &map, cfg.alpha)?, truth.as_deref(), &grid)?;
    write_estimate(out, &grid, &result, truth.as_deref())?;
    Ok(json!({
        "experiment": "invert-source",
        "kind": cfg.kind,
        "alpha": result.alpha,
        "residual": result.residual,
        "rel_error": result.rel_error,
        "condition": result.condition,
    }))
}

fn background(
    r: &Resolved,
    block: &str,
    coeffs: &EllipticCoefficients,
    source: &str,
    lift: &str,
) -> std::result::Result<SpaceTime, CliError> {
    let grid = r.grid;
    let g = r
        .expr(&format!("{block}.background_source"), source, true)?
        .sample_space_time(&grid)
        .map_err(|e| CliError::config(&format!("{block}.background_source"), e))?;
    let h = r
        .expr(&format!("{block}.lift"), lift, false)?
        .sample_space(&grid)
        .map_err(|e| CliError::config(&format!("{block}.lift"), e))?;
    Ok(solve_lifted(&r.params, coeffs, &g, &h)?)
}

fn invert_coefficient(r: &Resolved, out: &mut OutputDir, unknown: Unknown) -> std::result::Result<serde_json::Value, CliError> {
    let (cfg, block): (&InvertCoefficientConfig, &str) = match unknown {
        Unknown::Diffusion => (&r.config.invert_diffusion, "invert_diffusion"),
        _ => (&r.config.invert_zeroth, "invert_zeroth"),
    };
    let grid = r.grid;
    let coeffs = r.coeffs(&grid)?;
    let u2 = background(r, block, &coeffs, &cfg.background_source, &cfg.lift)?;
    let truth = match &cfg.truth {
        Some(t) => Some(
            r.expr(&format!("{block}.truth"), t, false)?
                .sample_space(&grid)
                .map_err(|e| CliError::config(&format!("{block}.truth"), e))?,
        ),
        None => None,
    };
    let obs = match (&cfg.observations, &truth) {
        (Some(path), _) => {
            let o = read_observations(path, &format!("{block}.observations"))?;
            o.validate(&grid, &r.geometry)?;
            o
        }
        (None, Some(diff)) => {
            let mut c1 = coeffs.clone();
            let target = if unknown == Unknown::Diffusion { &mut c1.a } else { &mut c1.c };
            for (v, d) in target.iter_mut().zip(diff) {
                *v += d;
            }
            let u1 = background(r, block, &c1, &cfg.background_source, &cfg.lift)?;
            let o = ObservationSet::observe(&u1, &r.params, cfg.kind, &r.geometry)?;
            if cfg.noise_level > 0.0 { o.with_noise(cfg.noise_level, r.config.seed)? } else { o }
        }
        (None, None) => return Err(CliError::config(block, "either truth or observations is required")),
    };
    out.json("observations.json", &obs)?;
    let mut extra = serde_json::Map::new();
    let result = match unknown {
        Unknown::Diffusion => {
            let t = transversality(&u2, &r.params, cfg.kind, &r.geometry)?;
            extra.insert("transversality".into(), json!(t));
            let basis = diffusion_basis(&grid, cfg.kind, &r.geometry, cfg.basis_size)?;
            invert_diffusion_coefficient(&obs, &u2, &r.params, &coeffs, &r.geometry, &basis, cfg.alpha, cfg.min_transversality)?
        }
        _ => {
            let basis = source_basis(&grid, cfg.kind, &r.geometry, cfg.basis_size)?;
            invert_zeroth_coefficient(&obs, &u2, &r.params, &coeffs, &r.geometry, &basis, cfg.alpha)?
        }
    };
    let result = finish_inversion(result, truth.as_deref(), &grid)?;
    write_estimate(out, &grid, &result, truth.as_deref())?;
    let mut summary = json!({
        "experiment": if unknown == Unknown::Diffusion { "invert-diffusion" } else { "invert-zeroth" },
        "kind": cfg.kind,
        "alpha": result.alpha,
        "residual": result.residual,
        "rel_error": result.rel_error,
        "condition": result.condition,
    });
    if let Some(map) = summary.as_object_mut() {
        map.extend(extra);
    }
    Ok(summary)
}

fn stability(r: &Resolved, out: &mut OutputDir) -> std::result::Result<serde_json::Value, CliError> {
    let cfg = &r.config.stability;
    let spec = cfg.ensemble.spec(r.config.seed);
    let grid = r.grid;
    let coeffs = r.coeffs(&grid)?;
    let driver = match spec.unknown {
        Unknown::Source => Driver::Source(
            r.expr("stability.r", &cfg.r, true)?.sample_space_time(&grid).map_err(|e| CliError::config("stability.r", e))?,
        ),
        Unknown::Zeroth => {
            let lift = cfg.lift.as_deref().unwrap_or("1");
            Driver::Zeroth(background(r, "stability", &coeffs, &cfg.background_source, lift)?)
        }
        Unknown::Diffusion => {
            let lift = cfg.lift.as_deref().unwrap_or("x");
            Driver::Diffusion(background(r, "stability", &coeffs, &cfg.background_source, lift)?)
        }
    };
    let (records, summary) = run_stability_ensemble(&spec, &r.params, &coeffs, &r.geometry, &driver)?;
    out.csv(
        schema::STABILITY,
        records.iter().map(|rec| {
            vec![
                rec.member.to_string(),
                fmt_f64(rec.unknown_norm),
                fmt_f64(rec.snapshot_norm),
                fmt_f64(rec.aggregate),
                fmt_opt(rec.ratio),
                rec.degenerate.to_string(),
            ]
        }),
    )?;
    Ok(json!({
        "experiment": "stability",
        "kind": spec.kind,
        "unknown": spec.unknown,
        "summary": summary,
        "config": r.config,
    }))
}
