//! Acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero when any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use fracinv::carleman::{build_d1, build_d2, default_s_grid, scan_all, CarlemanWeights, LemmaId, ScanResolution, WeightWindow, DEFAULT_LAMBDAS};
use fracinv::cli::config::{Experiment, RunConfig};
use fracinv::cli::{run_config, RunOptions};
use fracinv::forward::{convergence_study, solve_forward, ManufacturedFamily, QuadraticSine, RefinementAxis};
use fracinv::frac_ops::caputo;
use fracinv::functions::polynomial_bump;
use fracinv::model::{EllipticCoefficients, Grid, ModelParams, ObservationGeometry, SpaceTime};
use fracinv::transform::{diffusion_expansion_ftilde, source_expansion_f, transform_with_residual};
use serde_json::{json, Value};

type Check = Result<(bool, String), String>;

fn caputo_oracles() -> Check {
    let start = Instant::now();
    let nt = 1000;
    let dt = 1.0 / nt as f64;
    let line: Vec<f64> = (0..=nt).map(|n| n as f64 * dt).collect();
    let square: Vec<f64> = line.iter().map(|t| t * t).collect();
    let d1 = *caputo(&line, 0.5, dt).map_err(|e| e.to_string())?.last().unwrap();
    let d2 = *caputo(&square, 0.5, dt).map_err(|e| e.to_string())?.last().unwrap();
    let e1 = (d1 - 2.0 / PI.sqrt()).abs() / (2.0 / PI.sqrt());
    let e2 = (d2 - 8.0 / (3.0 * PI.sqrt())).abs() / (8.0 / (3.0 * PI.sqrt()));
    let secs = start.elapsed().as_secs_f64();
    Ok((e1 < 1e-3 && e2 < 1e-3 && secs < 1.0, format!("rel errors t: {e1:.2e}, t^2: {e2:.2e} (limit 1e-3), {secs:.3} s")))
}

fn orders(rows: &[fracinv::forward::ConvergenceRow]) -> Vec<f64> {
    rows.iter().filter_map(|r| r.order).collect()
}

fn fmt_orders(o: &[f64]) -> String {
    o.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
}

fn forward_convergence(timer: &mut f64) -> Check {
    let start = Instant::now();
    let fam = QuadraticSine::default();
    let time = convergence_study(&fam, 1.0, &[(255, 128), (255, 256), (255, 512)], RefinementAxis::Time)
        .map_err(|e| e.to_string())?;
    let space = convergence_study(&fam, 1.0, &[(31, 4096), (63, 4096), (127, 4096)], RefinementAxis::Space)
        .map_err(|e| e.to_string())?;
    *timer += start.elapsed().as_secs_f64();
    let (ot, os) = (orders(&time), orders(&space));
    let temporal = ot.iter().all(|&o| o >= 1.4);
    let spatial = os.iter().all(|&o| (o - 2.0).abs() <= 0.3);
    let secs = *timer;
    Ok((
        temporal && spatial && secs < 60.0,
        format!(
            "temporal orders [{}] at nx=255 (need >= 1.4) {}; spatial orders [{}] at nt=4096 (need 2 +- 0.3) {}",
            fmt_orders(&ot),
            if temporal { "ok" } else { "short" },
            fmt_orders(&os),
            if spatial { "ok" } else { "off" },
        ),
    ))
}

fn forward_temporal_diagnostic(timer: &mut f64) -> Result<String, String> {
    let start = Instant::now();
    let rows = convergence_study(&QuadraticSine::default(), 1.0, &[(1023, 128), (1023, 256), (1023, 512)], RefinementAxis::Time)
        .map_err(|e| e.to_string())?;
    *timer += start.elapsed().as_secs_f64();
    let errs: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.max_error)).collect();
    Ok(format!(
        "temporal orders at nx=1023: [{}], errors [{}]; forward total {:.1} s (limit 60)",
        fmt_orders(&orders(&rows)),
        errs.join(", "),
        timer
    ))
}

fn transform_identity() -> Check {
    let fam = QuadraticSine::default();
    let mut residuals = Vec::new();
    for nt in [256, 512] {
        let grid = Grid::new(255, nt, 1.0).map_err(|e| e.to_string())?;
        let problem = fam.problem(grid).map_err(|e| e.to_string())?;
        let u = solve_forward(&problem).map_err(|e| e.to_string())?;
        let out = transform_with_residual(&u, &problem.source, &problem.params, &problem.coeffs).map_err(|e| e.to_string())?;
        residuals.push(out.residual_norm.unwrap_or(f64::NAN));
    }
    let drop = residuals[0] / residuals[1];

    let grid = Grid::new(255, 512, 1.0).map_err(|e| e.to_string())?;
    let params = ModelParams::with_default_window(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let coeffs = EllipticCoefficients::laplacian(&grid);
    let f: Vec<f64> = grid.xs().iter().map(|&x| (PI * x).sin().powi(2)).collect();
    let r = SpaceTime::from_fn(grid, |x, t| 2.0 + (PI * x).sin() * (-t).exp());
    let fd = source_expansion_f(&f, &r, &params, &coeffs).map_err(|e| e.to_string())?.rel_discrepancy;
    let a: Vec<f64> = grid.xs().iter().map(|&x| polynomial_bump(x, 0.5, 0.38, 10)).collect();
    let rd = SpaceTime::from_fn(grid, |x, t| (2.0 + x) * t * t);
    let geometry = ObservationGeometry::default();
    let fdt = diffusion_expansion_ftilde(&a, &rd, &params, &coeffs, &geometry).map_err(|e| e.to_string())?.rel_discrepancy;
    Ok((
        drop >= 2.0 && fd < 1e-5 && fdt < 1e-5,
        format!(
            "residual {:.3e} -> {:.3e}, drop {drop:.3} (need >= 2); F forms {fd:.2e}, F~ forms {fdt:.2e} (limit 1e-5)",
            residuals[0], residuals[1]
        ),
    ))
}

fn carleman_scans() -> Check {
    let start = Instant::now();
    let params = ModelParams::with_default_window(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let geometry = ObservationGeometry::default();
    let coeffs = |g: &Grid| Ok(EllipticCoefficients::laplacian(g));
    let results = scan_all(&LemmaId::ALL, &DEFAULT_LAMBDAS, &default_s_grid(), &params, &geometry, &coeffs, &ScanResolution::default())
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut worst = (0.0_f64, String::new());
    let mut bad = Vec::new();
    for r in &results {
        let tail = r.tail_growth().unwrap_or(f64::INFINITY);
        if !r.all_finite() || tail > 3.0 {
            bad.push(format!("{}@{}", r.lemma.name(), r.lambda));
        }
        if tail > worst.0 {
            worst = (tail, format!("{} lambda={}", r.lemma.name(), r.lambda));
        }
    }
    let flags = results.iter().filter(|r| r.red_flag()).count();
    Ok((
        bad.is_empty() && results.len() == 30 && secs < 120.0,
        format!(
            "{} cells, worst tail growth {:.3} ({}), limit 3; failing [{}]; {flags} red flags; {secs:.1} s (limit 120)",
            results.len(),
            worst.0,
            worst.1,
            bad.join(", ")
        ),
    ))
}

fn weight_geometry() -> Check {
    let params = ModelParams::with_default_window(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
    let geometry = ObservationGeometry::default();
    let grid = Grid::new(255, 512, 1.0).map_err(|e| e.to_string())?;
    let coeffs = EllipticCoefficients::laplacian(&grid);
    let d1 = build_d1(&geometry, &grid);
    let d2 = build_d2(&geometry, &grid).map_err(|e| e.to_string())?;
    d1.check_invariants(&grid, &coeffs).map_err(|e| format!("d1: {e}"))?;
    d2.check_invariants(&grid, &coeffs).map_err(|e| format!("d2: {e}"))?;
    let window = WeightWindow::Delta { t0: params.t0, delta: params.delta };
    let mut checked = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for d in [d1, d2] {
        for lambda in DEFAULT_LAMBDAS {
            let w = CarlemanWeights::new(d.clone(), lambda, 1.0, window).map_err(|e| e.to_string())?;
            for x in grid.xs() {
                let (_, top) = w.eval(x, params.t0).map_err(|e| e.to_string())?;
                for t in grid.ts().into_iter().filter(|&t| window.contains(t)) {
                    let (_, psi) = w.eval(x, t).map_err(|e| e.to_string())?;
                    worst = worst.max(psi - top);
                    checked += 1;
                }
            }
        }
    }
    Ok((worst <= 0.0, format!("max psi(x,t) - psi(x,t0) = {worst:.3e} over {checked} nodes; d1/d2 invariants hold")))
}

fn base(out: &Path, nx: usize, nt: usize) -> Value {
    json!({
        "model": { "rho1": 1.0, "rho2": 1.0, "t_final": 1.0 },
        "grid": { "nx": nx, "nt": nt },
        "seed": 2024,
        "output": out,
    })
}

fn run(experiment: Experiment, cfg: Value) -> Result<Value, String> {
    let cfg: RunConfig = serde_json::from_value(cfg).map_err(|e| e.to_string())?;
    run_config(experiment, cfg, &RunOptions::default()).map(|r| r.summary).map_err(|e| e.message)
}

fn rel_error(summary: &Value) -> f64 {
    summary["rel_error"].as_f64().unwrap_or(f64::INFINITY)
}

fn inverse_round_trips(dir: &Path) -> Check {
    let start = Instant::now();
    let source = run(Experiment::InvertSource, base(&dir.join("source"), 127, 256))?;
    let zeroth = run(Experiment::InvertZeroth, base(&dir.join("zeroth"), 127, 256))?;
    let diffusion = run(Experiment::InvertDiffusion, base(&dir.join("diffusion"), 127, 256))?;
    let mut noisy = base(&dir.join("noisy"), 127, 256);
    noisy["invert_source"] = json!({ "noise_level": 0.01, "alpha": { "discrepancy": {} } });
    let noisy = run(Experiment::InvertSource, noisy)?;
    let secs = start.elapsed().as_secs_f64();
    let (es, ez, ed, en) = (rel_error(&source), rel_error(&zeroth), rel_error(&diffusion), rel_error(&noisy));
    Ok((
        es < 0.05 && ez < 0.10 && ed < 0.15 && en < 0.20 && secs < 300.0,
        format!(
            "source {es:.2e} (< 0.05), zeroth {ez:.2e} (< 0.10), diffusion {ed:.2e} (< 0.15), noisy source {en:.2e} at alpha {:.2e} (< 0.20); {secs:.1} s (limit 300)",
            noisy["alpha"].as_f64().unwrap_or(f64::NAN)
        ),
    ))
}

fn read_ratios(path: &Path) -> Result<(Vec<Option<f64>>, usize), String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let mut ratios = Vec::new();
    let mut degenerate = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        if &rec[5] == "true" {
            degenerate += 1;
        }
        ratios.push(if rec[4].is_empty() { None } else { Some(rec[4].parse::<f64>().map_err(|e| e.to_string())?) });
    }
    Ok((ratios, degenerate))
}

fn stability_ensembles(dir: &Path) -> Check {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for kind in ["boundary", "interior"] {
        let out = dir.join(format!("stability-{kind}"));
        let mut cfg = base(&out, 256, 256);
        cfg["stability"] = json!({ "ensemble": { "count": 50, "kind": kind, "unknown": "source", "check_scaling": true } });
        let summary = run(Experiment::Stability, cfg)?;
        let s = &summary["summary"];
        let (ratios, degenerate) = read_ratios(&out.join("stability.csv"))?;
        let finite = ratios.len() == 50 && ratios.iter().all(|r| r.is_none_or(f64::is_finite)) && ratios.iter().flatten().count() + degenerate == 50;
        let deviation = s["scaling_deviation"].as_f64().unwrap_or(f64::INFINITY);
        let spread = s["spread"].as_f64().unwrap_or(f64::INFINITY);
        pass &= finite && deviation <= 1e-6 && spread < 100.0;
        parts.push(format!(
            "{kind}: finite {finite}, {degenerate} degenerate, scaling deviation {deviation:.1e}, spread {spread:.2}, C = {:.4e}",
            s["max_ratio"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((pass && secs < 600.0, format!("{}; {secs:.1} s (limit 600)", parts.join("; "))))
}

fn csv_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).map_err(|e| e.to_string())?)))
        .collect()
}

fn determinism(dir: &Path) -> Check {
    let mut compared = 0;
    let cases = [
        (Experiment::Stability, json!({ "stability": { "ensemble": { "count": 16 } } }), 256),
        (Experiment::InvertSource, json!({ "invert_source": { "noise_level": 0.01, "alpha": { "discrepancy": {} } } }), 127),
        (Experiment::Forward, json!({}), 127),
    ];
    for (i, (experiment, block, nx)) in cases.into_iter().enumerate() {
        let mut outputs = Vec::new();
        for (rep, workers) in [(0, 1), (1, 4)] {
            let out = dir.join(format!("det-{i}-{rep}"));
            let mut cfg = base(&out, nx, 128);
            for (k, v) in block.as_object().unwrap() {
                cfg[k] = v.clone();
            }
            let cfg: RunConfig = serde_json::from_value(cfg).map_err(|e| e.to_string())?;
            run_config(experiment, cfg, &RunOptions { workers: Some(workers), seed: None }).map_err(|e| e.message)?;
            outputs.push(csv_bytes(&out)?);
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            return Ok((false, format!("{} artifacts differ between runs", experiment.name())));
        }
        compared += outputs[0].len();
    }
    Ok((true, format!("{compared} CSV files byte-identical across repeated runs with 1 and 4 workers")))
}

fn report(name: &str, check: Check, failures: &mut Vec<String>) {
    let (pass, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    if !pass {
        failures.push(name.to_string());
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut failures = Vec::new();
    let mut forward_secs = 0.0;
    report("caputo oracles", caputo_oracles(), &mut failures);
    report("forward convergence", forward_convergence(&mut forward_secs), &mut failures);
    match forward_temporal_diagnostic(&mut forward_secs) {
        Ok(line) => println!("INFO forward convergence: {line}"),
        Err(e) => println!("INFO forward convergence: diagnostic failed: {e}"),
    }
    report("transform identity", transform_identity(), &mut failures);
    report("carleman scans", carleman_scans(), &mut failures);
    report("weight geometry", weight_geometry(), &mut failures);
    report("inverse round trips", inverse_round_trips(dir.path()), &mut failures);
    report("stability ensembles", stability_ensembles(dir.path()), &mut failures);
    report("determinism", determinism(dir.path()), &mut failures);
    if failures.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", failures.len(), failures.join(", "));
        std::process::exit(1);
    }
}
