//! Reduction of the half-order equation to the integer-order identity
//!
//! `rho2^2 u_t - (rho1 d_t - L)^2 u = G`,
//! `G = [rho2 d_t^{1/2} - (rho1 d_t - L)] g + rho2 g(x, 0) / sqrt(pi t)`,
//!
//! together with the expanded source terms for the product source
//! `f(x) R(x, t)` and the linearized diffusion source `(a r')'`. Every
//! expansion is evaluated twice (operator applied directly, and the grouped
//! expansion) so the two discretizations can be cross-checked.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frac_ops::{apply_l, caputo, EllipticOperator};
use crate::model::{EllipticCoefficients, ModelParams, ObservationGeometry, SpaceTime, TimeSeriesField};
use crate::quadrature::trapezoid_weights;
use crate::stencil::Differentiator;

#[derive(Debug, Clone)]
pub struct TransformOutput {
    /// `G` at every sample; level 0 is not evaluated and holds zeros.
    pub g_transformed: SpaceTime,
    /// Residual of the second-order identity, when a solution was supplied.
    pub residual_norm: Option<f64>,
    /// Whether `g(., 0)` is nonzero, activating the `1/sqrt(pi t)` term.
    pub singular_part_flag: bool,
}

pub(crate) fn time_derivative(field: &SpaceTime, order: usize, accuracy: usize) -> Result<SpaceTime> {
    let d = Differentiator::new(field.grid.n_time(), field.grid.dt, order, accuracy)?;
    Ok(field.map_series(|_, s| d.apply(s)))
}

pub(crate) fn half_derivative(field: &SpaceTime) -> Result<SpaceTime> {
    let dt = field.grid.dt;
    let mut out = SpaceTime::zeros(field.grid);
    for i in 0..field.grid.n_space() {
        out.set_node_series(i, &caputo(&field.node_series(i), 0.5, dt)?);
    }
    Ok(out)
}

pub(crate) fn space_derivative(field: &SpaceTime, order: usize, accuracy: usize) -> Result<SpaceTime> {
    let d = Differentiator::new(field.grid.n_space(), field.grid.dx, order, accuracy)?;
    Ok(field.map_levels(|_, row| d.apply(row)))
}

fn check_shapes(field: &SpaceTime, coeffs: &EllipticCoefficients) -> Result<()> {
    coeffs.check_shape(field.grid.n_space())?;
    if field.values.len() != field.grid.n_space() * field.grid.n_time() {
        return Err(Error::Data("field does not match its grid".into()));
    }
    Ok(())
}

/// Second-order L with one-sided closures at the endpoints.
fn apply_l_all(u: &[f64], coeffs: &EllipticCoefficients, full: &EllipticOperator, dx: f64) -> Result<Vec<f64>> {
    let mut out = apply_l(u, coeffs, dx)?;
    let ends = full.apply(u);
    let n = u.len();
    out[0] = ends[0];
    out[n - 1] = ends[n - 1];
    Ok(out)
}

fn singular_weight(params: &ModelParams, t: f64) -> f64 {
    params.rho2 / (PI * t).sqrt()
}

/// Computes `G` with the L1 half derivative, second-order time differences
/// and the conservative `L`.
pub fn transform_rhs(g: &SpaceTime, params: &ModelParams, coeffs: &EllipticCoefficients) -> Result<TransformOutput> {
    check_shapes(g, coeffs)?;
    let grid = g.grid;
    let full = EllipticOperator::new(coeffs, grid.dx, 2)?;
    let half = half_derivative(g)?;
    let dg = time_derivative(g, 1, 2)?;
    let g0 = g.level(0);
    let g0_scale = g.max_abs();
    let singular = g0.iter().any(|v| v.abs() > 1e-14 * g0_scale);
    let mut out = SpaceTime::zeros(grid);
    for n in 1..grid.n_time() {
        let t = grid.t(n);
        let lg = apply_l_all(g.level(n), coeffs, &full, grid.dx)?;
        let sw = singular_weight(params, t);
        let row = out.level_mut(n);
        for i in 0..grid.n_space() {
            row[i] = params.rho2 * half.at(i, n) - params.rho1 * dg.at(i, n) + lg[i];
            if singular {
                row[i] += sw * g0[i];
            }
        }
    }
    Ok(TransformOutput { g_transformed: out, residual_norm: None, singular_part_flag: singular })
}

/// How `(rho1 d_t - L)^2` is discretized in the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualForm {
    /// `rho1^2 u_tt - 2 rho1 L u_t + L^2 u`, each term discretized directly.
    #[default]
    Expanded,
    /// The discrete first-order operator `rho1 D_t - L_h` applied twice.
    Composed,
}

/// Discrete L2 norm of `rho2^2 u_t - (rho1 d_t - L)^2 u - G` over nodes
/// `2 dx <= x <= 1 - 2 dx` and time levels `2 dt <= t <= T - 2 dt`, so that
/// every stencil of `L^2` stays inside the grid.
pub fn second_order_residual(
    u: &TimeSeriesField,
    g_transformed: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
) -> Result<f64> {
    second_order_residual_with(u, g_transformed, params, coeffs, ResidualForm::Expanded)
}

pub fn second_order_residual_with(
    u: &TimeSeriesField,
    g_transformed: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    form: ResidualForm,
) -> Result<f64> {
    let field = u.samples();
    let grid = *u.grid();
    if g_transformed.grid != grid {
        return Err(Error::Data("solution and transformed source live on different grids".into()));
    }
    check_shapes(field, coeffs)?;
    if grid.nt < 8 {
        return Err(Error::Sizing("residual window needs at least 8 time steps".into()));
    }
    let (rho1, rho2) = (params.rho1, params.rho2);
    let lu = field.map_levels(|_, row| apply_l(row, coeffs, grid.dx).unwrap_or_default());
    let ut = time_derivative(field, 1, 2)?;

    let square = match form {
        ResidualForm::Expanded => {
            let utt = time_derivative(field, 2, 2)?;
            let lut = time_derivative(&lu, 1, 2)?;
            let llu = lu.map_levels(|_, row| apply_l(row, coeffs, grid.dx).unwrap_or_default());
            let mut s = utt.scaled(rho1 * rho1);
            s.axpy(-2.0 * rho1, &lut);
            s.axpy(1.0, &llu);
            s
        }
        ResidualForm::Composed => {
            let mut w = ut.scaled(rho1);
            w.axpy(-1.0, &lu);
            let wt = time_derivative(&w, 1, 2)?;
            let lw = w.map_levels(|_, row| apply_l(row, coeffs, grid.dx).unwrap_or_default());
            let mut s = wt.scaled(rho1);
            s.axpy(-1.0, &lw);
            s
        }
    };

    let nt = grid.nt;
    let wt = trapezoid_weights(nt - 3, grid.dt);
    let mut acc = 0.0;
    for (k, n) in (2..=nt - 2).enumerate() {
        for i in 2..grid.nx {
            let r = rho2 * rho2 * ut.at(i, n) - square.at(i, n) - g_transformed.at(i, n);
            acc += wt[k] * grid.dx * r * r;
        }
    }
    Ok(acc.sqrt())
}

/// Transforms `g` and evaluates the residual of `u` in one call.
pub fn transform_with_residual(
    u: &TimeSeriesField,
    g: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
) -> Result<TransformOutput> {
    let mut out = transform_rhs(g, params, coeffs)?;
    out.residual_norm = Some(second_order_residual(u, &out.g_transformed, params, coeffs)?);
    Ok(out)
}

/// Both evaluations of an expanded source and their disagreement.
#[derive(Debug, Clone)]
pub struct ExpansionCheck {
    pub direct: SpaceTime,
    pub expanded: SpaceTime,
    /// `max |direct - expanded| / max |direct|` over interior nodes and
    /// levels `n >= 1`.
    pub rel_discrepancy: f64,
}

fn compare(direct: SpaceTime, expanded: SpaceTime) -> ExpansionCheck {
    let grid = direct.grid;
    let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
    for n in 1..grid.n_time() {
        for i in 1..=grid.nx {
            diff = diff.max((direct.at(i, n) - expanded.at(i, n)).abs());
            scale = scale.max(direct.at(i, n).abs());
        }
    }
    let rel_discrepancy = if scale > 0.0 { diff / scale } else { diff };
    ExpansionCheck { direct, expanded, rel_discrepancy }
}

/// Spatial stencil accuracy used by the expansion cross-checks.
pub const EXPANSION_ACCURACY: usize = 6;

fn row_derivs(row: &[f64], ops: &[Differentiator]) -> Vec<Vec<f64>> {
    ops.iter().map(|d| d.apply(row)).collect()
}

fn derivative_ops(n: usize, h: f64, max: usize, accuracy: usize) -> Result<Vec<Differentiator>> {
    (0..=max).map(|k| Differentiator::new(n, h, k, accuracy)).collect()
}

/// `F = [rho2 d_t^{1/2} - (rho1 d_t - L)](f R) + rho2 f R(x,0) / sqrt(pi t)`.
///
/// Requires `|R(x, t0)| > 0` at every node and `f = 0` at both endpoints.
pub fn source_expansion_f(
    f: &[f64],
    r: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
) -> Result<ExpansionCheck> {
    source_expansion_f_with(f, r, params, coeffs, EXPANSION_ACCURACY)
}

pub fn source_expansion_f_with(
    f: &[f64],
    r: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    accuracy: usize,
) -> Result<ExpansionCheck> {
    let grid = r.grid;
    let m = grid.n_space();
    check_shapes(r, coeffs)?;
    if f.len() != m {
        return Err(Error::Data(format!("f has {} samples, expected {m}", f.len())));
    }
    let f_scale = f.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if f[0].abs() > 1e-12 * f_scale.max(1.0) || f[m - 1].abs() > 1e-12 * f_scale.max(1.0) {
        return Err(Error::Assumption("f must vanish at both endpoints".into()));
    }
    let n0 = grid.nearest_level(params.t0);
    if let Some(i) = r.level(n0).iter().position(|v| v.abs() == 0.0 || !v.is_finite()) {
        return Err(Error::Assumption(format!("|R(x, t0)| vanishes at node {i} (x = {:.4})", grid.x(i))));
    }

    let (rho1, rho2) = (params.rho1, params.rho2);
    let ops = derivative_ops(m, grid.dx, 2, accuracy)?;
    let lop = EllipticOperator::new(coeffs, grid.dx, accuracy)?;
    let da = ops[1].apply(&coeffs.a);
    let (a, b, c) = (&coeffs.a, &coeffs.b, &coeffs.c);
    let df = row_derivs(f, &ops);

    let mut fr = SpaceTime::zeros(grid);
    for n in 0..grid.n_time() {
        for (v, (rv, fv)) in fr.level_mut(n).iter_mut().zip(r.level(n).iter().zip(f)) {
            *v = rv * fv;
        }
    }
    let half_fr = half_derivative(&fr)?;
    let dt_fr = time_derivative(&fr, 1, 2)?;
    let half_r = half_derivative(r)?;
    let dt_r = time_derivative(r, 1, 2)?;
    let r0 = r.level(0).to_vec();

    let mut direct = SpaceTime::zeros(grid);
    let mut expanded = SpaceTime::zeros(grid);
    for n in 1..grid.n_time() {
        let sw = singular_weight(params, grid.t(n));
        let l_fr = lop.apply(fr.level(n));
        let dr = row_derivs(r.level(n), &ops);
        let drow = direct.level_mut(n);
        for i in 0..m {
            drow[i] = rho2 * half_fr.at(i, n) - rho1 * dt_fr.at(i, n) + l_fr[i] + sw * f[i] * r0[i];
        }
        let erow = expanded.level_mut(n);
        for i in 0..m {
            let rv = dr[0][i];
            let div_a_df = a[i] * df[2][i] + da[i] * df[1][i];
            let first = 2.0 * a[i] * dr[1][i] - b[i] * rv;
            let bracket = rho2 * half_r.at(i, n) - rho1 * dt_r.at(i, n)
                + a[i] * dr[2][i]
                + da[i] * dr[1][i]
                - b[i] * dr[1][i]
                - c[i] * rv
                + sw * r0[i];
            erow[i] = rv * div_a_df + first * df[1][i] + bracket * f[i];
        }
    }
    Ok(compare(direct, expanded))
}

/// `F~ = [rho2 d_t^{1/2} - (rho1 d_t - A1)] (a r')' + rho2 (a r'(x,0))' / sqrt(pi t)`
/// with `A1` built from `coeffs`. The coefficient difference `a` must vanish
/// outside `D'`.
pub fn diffusion_expansion_ftilde(
    a_diff: &[f64],
    r: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    geometry: &ObservationGeometry,
) -> Result<ExpansionCheck> {
    diffusion_expansion_ftilde_with(a_diff, r, params, coeffs, geometry, EXPANSION_ACCURACY)
}

pub fn diffusion_expansion_ftilde_with(
    a_diff: &[f64],
    r: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    geometry: &ObservationGeometry,
    accuracy: usize,
) -> Result<ExpansionCheck> {
    let grid = r.grid;
    let m = grid.n_space();
    check_shapes(r, coeffs)?;
    if a_diff.len() != m {
        return Err(Error::Data(format!("a has {} samples, expected {m}", a_diff.len())));
    }
    let scale = a_diff.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    for (i, v) in a_diff.iter().enumerate() {
        let x = grid.x(i);
        if geometry.in_outer_region(x) && v.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::Assumption(format!("a is nonzero in D at x = {x:.4}")));
        }
    }

    let (rho1, rho2) = (params.rho1, params.rho2);
    let ops = derivative_ops(m, grid.dx, 4, accuracy)?;
    let lop = EllipticOperator::new(coeffs, grid.dx, accuracy)?;
    let da1 = ops[1].apply(&coeffs.a);
    let (a1, b, c) = (&coeffs.a, &coeffs.b, &coeffs.c);
    let da = row_derivs(a_diff, &ops);

    // w = (a r')' in flux form
    let flux_div = |row: &[f64]| -> Vec<f64> {
        let dr = ops[1].apply(row);
        let q: Vec<f64> = dr.iter().zip(a_diff).map(|(d, a)| a * d).collect();
        ops[1].apply(&q)
    };
    let w = r.map_levels(|_, row| flux_div(row));
    let half_w = half_derivative(&w)?;
    let dt_w = time_derivative(&w, 1, 2)?;
    let w0 = w.level(0).to_vec();

    let r1 = space_derivative(r, 1, accuracy)?;
    let r2 = space_derivative(r, 2, accuracy)?;
    let half_r1 = half_derivative(&r1)?;
    let half_r2 = half_derivative(&r2)?;
    let dt_r1 = time_derivative(&r1, 1, 2)?;
    let dt_r2 = time_derivative(&r2, 1, 2)?;
    let r0 = row_derivs(r.level(0), &ops);

    let mut direct = SpaceTime::zeros(grid);
    let mut expanded = SpaceTime::zeros(grid);
    for n in 1..grid.n_time() {
        let sw = singular_weight(params, grid.t(n));
        let lw = lop.apply(w.level(n));
        let drow = direct.level_mut(n);
        for i in 0..m {
            drow[i] = rho2 * half_w.at(i, n) - rho1 * dt_w.at(i, n) + lw[i] + sw * w0[i];
        }
        let dr = row_derivs(r.level(n), &ops);
        let erow = expanded.level_mut(n);
        for i in 0..m {
            let drift = da1[i] - b[i];
            let third = a1[i] * dr[1][i] * da[3][i];
            let hessian = 2.0 * a1[i] * dr[2][i] * da[2][i];
            let laplace = a1[i] * dr[2][i] * da[2][i];
            let transport = drift * dr[1][i] * da[2][i];
            let grad_bracket = rho2 * half_r1.at(i, n) - rho1 * dt_r1.at(i, n)
                + 3.0 * a1[i] * dr[3][i]
                + dr[2][i] * da1[i]
                - dr[2][i] * b[i]
                - c[i] * dr[1][i]
                + sw * r0[1][i];
            let transport2 = drift * da[1][i] * dr[2][i];
            let zeroth_bracket = rho2 * half_r2.at(i, n) - rho1 * dt_r2.at(i, n)
                + da1[i] * dr[3][i]
                + a1[i] * dr[4][i]
                - b[i] * dr[3][i]
                - c[i] * dr[2][i]
                + sw * r0[2][i];
            erow[i] = third
                + hessian
                + laplace
                + transport
                + grad_bracket * da[1][i]
                + transport2
                + zeroth_bracket * da[0][i];
        }
    }
    Ok(compare(direct, expanded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{solve_forward, ManufacturedFamily, QuadraticSine};
    use crate::functions::{polynomial_bump, smooth_bump};
    use crate::model::Grid;

    fn unit_params() -> ModelParams {
        ModelParams::with_default_window(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_source_transforms_to_zero() {
        let grid = Grid::new(31, 32, 1.0).unwrap();
        let out = transform_rhs(&SpaceTime::zeros(grid), &unit_params(), &EllipticCoefficients::laplacian(&grid)).unwrap();
        assert!(!out.singular_part_flag);
        assert!(out.g_transformed.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn time_independent_source() {
        let grid = Grid::new(63, 64, 1.0).unwrap();
        let coeffs = EllipticCoefficients::laplacian(&grid);
        let f: Vec<f64> = grid.xs().iter().map(|x| (PI * x).sin() * x).collect();
        let g = SpaceTime::separable(grid, &f, &vec![1.0; grid.n_time()]).unwrap();
        let out = transform_rhs(&g, &unit_params(), &coeffs).unwrap();
        assert!(out.singular_part_flag);
        let lf = apply_l(&f, &coeffs, grid.dx).unwrap();
        for n in 1..grid.n_time() {
            let t = grid.t(n);
            for i in 1..=grid.nx {
                let want = lf[i] + f[i] / (PI * t).sqrt();
                assert!((out.g_transformed.at(i, n) - want).abs() < 1e-10, "{i} {n}");
            }
        }
    }

    #[test]
    fn linear_in_time_source() {
        let grid = Grid::new(255, 1000, 1.0).unwrap();
        let coeffs = EllipticCoefficients::laplacian(&grid);
        let g = SpaceTime::from_fn(grid, |x, t| (PI * x).sin() * t);
        let out = transform_rhs(&g, &unit_params(), &coeffs).unwrap();
        assert!(!out.singular_part_flag);
        for n in 1..grid.n_time() {
            let t = grid.t(n);
            for i in (1..=grid.nx).step_by(8) {
                let x = grid.x(i);
                let want = (PI * x).sin() * (2.0 * (t / PI).sqrt() - 1.0 - PI * PI * t);
                assert!((out.g_transformed.at(i, n) - want).abs() < 1e-2, "{i} {n}");
            }
        }
    }

    #[test]
    fn transform_is_linear() {
        let grid = Grid::new(31, 40, 1.0).unwrap();
        let coeffs = EllipticCoefficients::from_fns(&grid, |x| 1.0 + x, |_| 0.2, |x| x);
        let p = ModelParams::with_default_window(1.5, -0.7, 1.0).unwrap();
        let g1 = SpaceTime::from_fn(grid, |x, t| (PI * x).sin() * t * t);
        let g2 = SpaceTime::from_fn(grid, |x, t| x * (1.0 - x) * (3.0 * t).cos());
        let mut g = g1.scaled(2.0);
        g.axpy(-3.0, &g2);
        let a = transform_rhs(&g1, &p, &coeffs).unwrap().g_transformed;
        let b = transform_rhs(&g2, &p, &coeffs).unwrap().g_transformed;
        let c = transform_rhs(&g, &p, &coeffs).unwrap().g_transformed;
        for k in 0..c.values.len() {
            assert!((c.values[k] - 2.0 * a.values[k] + 3.0 * b.values[k]).abs() < 1e-9 * (1.0 + c.values[k].abs()));
        }
    }

    fn manufactured_residual(nx: usize, nt: usize, form: ResidualForm) -> f64 {
        let fam = QuadraticSine::default();
        let grid = Grid::new(nx, nt, 1.0).unwrap();
        let prob = fam.problem(grid).unwrap();
        let u = solve_forward(&prob).unwrap();
        let out = transform_rhs(&prob.source, &prob.params, &prob.coeffs).unwrap();
        second_order_residual_with(&u, &out.g_transformed, &prob.params, &prob.coeffs, form).unwrap()
    }

    #[test]
    fn zero_residual_for_zero() {
        let grid = Grid::new(31, 32, 1.0).unwrap();
        let u = TimeSeriesField::new(SpaceTime::zeros(grid)).unwrap();
        let r = second_order_residual(&u, &SpaceTime::zeros(grid), &unit_params(), &EllipticCoefficients::laplacian(&grid)).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn residual_decreases_under_refinement() {
        let coarse = manufactured_residual(63, 128, ResidualForm::Expanded);
        let fine = manufactured_residual(127, 256, ResidualForm::Expanded);
        assert!(fine < coarse / 2.0, "{coarse} -> {fine}");
    }

    #[test]
    fn expanded_and_composed_residuals_agree() {
        let a = manufactured_residual(63, 128, ResidualForm::Expanded);
        let b = manufactured_residual(63, 128, ResidualForm::Composed);
        assert!(((a - b) / a).abs() < 0.5, "{a} vs {b}");
    }

    #[test]
    fn f_expansion_trivial_cases() {
        let grid = Grid::new(63, 64, 1.0).unwrap();
        let p = unit_params();
        let coeffs = EllipticCoefficients::laplacian(&grid);
        let r = SpaceTime::from_fn(grid, |_, _| 1.0);
        let zero = source_expansion_f(&vec![0.0; grid.n_space()], &r, &p, &coeffs).unwrap();
        assert!(zero.direct.values.iter().all(|&v| v == 0.0));

        let f: Vec<f64> = grid.xs().iter().map(|x| (PI * x).sin().powi(2)).collect();
        let out = source_expansion_f(&f, &r, &p, &coeffs).unwrap();
        let lop = EllipticOperator::new(&coeffs, grid.dx, EXPANSION_ACCURACY).unwrap();
        let lf = lop.apply(&f);
        for n in 1..grid.n_time() {
            let t = grid.t(n);
            for i in 1..=grid.nx {
                let want = lf[i] + f[i] / (PI * t).sqrt();
                assert!((out.direct.at(i, n) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn f_expansion_forms_agree() {
        let grid = Grid::new(255, 512, 1.0).unwrap();
        let coeffs = EllipticCoefficients::from_fns(&grid, |x| 1.0 + 0.3 * x * x, |x| 0.5 * x, |x| 1.0 + x);
        let p = ModelParams::with_default_window(1.0, 1.0, 1.0).unwrap();
        let f: Vec<f64> = grid.xs().iter().map(|x| (PI * x).sin().powi(2)).collect();
        let r = SpaceTime::from_fn(grid, |x, t| 2.0 + (PI * x).sin() * (-t).exp());
        let out = source_expansion_f(&f, &r, &p, &coeffs).unwrap();
        assert!(out.rel_discrepancy < 1e-6, "{}", out.rel_discrepancy);
    }

    #[test]
    fn f_expansion_is_homogeneous_in_f() {
        let grid = Grid::new(63, 64, 1.0).unwrap();
        let coeffs = EllipticCoefficients::laplacian(&grid);
        let p = unit_params();
        let f: Vec<f64> = grid.xs().iter().map(|x| (PI * x).sin() * x).collect();
        let f3: Vec<f64> = f.iter().map(|v| 3.0 * v).collect();
        let r = SpaceTime::from_fn(grid, |x, t| 1.0 + x + t);
        let a = source_expansion_f(&f, &r, &p, &coeffs).unwrap().direct;
        let b = source_expansion_f(&f3, &r, &p, &coeffs).unwrap().direct;
        for k in 0..a.values.len() {
            assert!((b.values[k] - 3.0 * a.values[k]).abs() < 1e-10 * (1.0 + b.values[k].abs()));
        }
    }

    #[test]
    fn f_expansion_rejects_vanishing_r() {
        let grid = Grid::new(31, 32, 1.0).unwrap();
        let f: Vec<f64> = grid.xs().iter().map(|x| (PI * x).sin()).collect();
        let r = SpaceTime::from_fn(grid, |x, _| x - 0.5);
        let e = source_expansion_f(&f, &r, &unit_params(), &EllipticCoefficients::laplacian(&grid)).unwrap_err();
        assert!(matches!(e, Error::Assumption(_)));
    }

    #[test]
    fn ftilde_trivial_cases() {
        let grid = Grid::new(63, 64, 1.0).unwrap();
        let geo = ObservationGeometry::default();
        let coeffs = EllipticCoefficients::laplacian(&grid);
        let p = unit_params();
        let r = SpaceTime::from_fn(grid, |x, t| (2.0 + x) * t * t);
        let z = diffusion_expansion_ftilde(&vec![0.0; grid.n_space()], &r, &p, &coeffs, &geo).unwrap();
        assert!(z.direct.values.iter().all(|&v| v == 0.0));

        let a: Vec<f64> = grid.xs().iter().map(|&x| polynomial_bump(x, 0.5, 0.3, 10)).collect();
        let flat = SpaceTime::from_fn(grid, |_, t| 1.0 + t);
        let out = diffusion_expansion_ftilde(&a, &flat, &p, &coeffs, &geo).unwrap();
        assert!(out.direct.max_abs() < 1e-6 && out.expanded.max_abs() < 1e-6);

        let wide: Vec<f64> = grid.xs().iter().map(|&x| smooth_bump(x, 0.5, 0.45)).collect();
        assert!(matches!(
            diffusion_expansion_ftilde(&wide, &r, &p, &coeffs, &geo),
            Err(Error::Assumption(_))
        ));
    }

    #[test]
    fn ftilde_forms_agree() {
        let grid = Grid::new(255, 512, 1.0).unwrap();
        let geo = ObservationGeometry::default();
        let coeffs = EllipticCoefficients::from_fns(&grid, |x| 1.0 + 0.2 * x, |x| 0.3 * x * x, |_| 0.5);
        let p = unit_params();
        let a: Vec<f64> = grid.xs().iter().map(|&x| polynomial_bump(x, 0.5, 0.38, 10)).collect();
        let r = SpaceTime::from_fn(grid, |x, t| (2.0 + x) * t * t);
        let out = diffusion_expansion_ftilde(&a, &r, &p, &coeffs, &geo).unwrap();
        assert!(out.rel_discrepancy < 1e-5, "{}", out.rel_discrepancy);
        let r = SpaceTime::from_fn(grid, |x, t| (2.0 + x + (PI * x).sin()) * (t + t * t));
        let out = diffusion_expansion_ftilde(&a, &r, &p, &coeffs, &geo).unwrap();
        assert!(out.rel_discrepancy < 1e-5, "{}", out.rel_discrepancy);
    }
}
