//! Implicit time stepping for `rho1 u_t + rho2 d_t^{1/2} u - L u = g` with
//! homogeneous Dirichlet data and zero initial state.

use crate::error::{Error, Result};
use crate::frac_ops::{l_stencil, CaputoScheme};
use crate::model::{EllipticCoefficients, Grid, ModelParams, SpaceTime, TimeSeriesField};
use crate::tridiag::solve_tridiagonal;

/// Discretization of the first-order time derivative. The half-order term
/// always uses the L1 scheme at the new level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeStepping {
    /// Second-order backward differences, started by one trapezoidal step.
    #[default]
    Bdf2,
    /// First-order backward Euler; unconditionally positivity preserving.
    BackwardEuler,
}

#[derive(Debug, Clone)]
pub struct ForwardProblem {
    pub params: ModelParams,
    pub coeffs: EllipticCoefficients,
    pub grid: Grid,
    pub source: SpaceTime,
    pub stepping: TimeStepping,
}

impl ForwardProblem {
    pub fn new(params: ModelParams, coeffs: EllipticCoefficients, grid: Grid, source: SpaceTime) -> Self {
        Self { params, coeffs, grid, source, stepping: TimeStepping::default() }
    }

    pub fn with_stepping(mut self, stepping: TimeStepping) -> Self {
        self.stepping = stepping;
        self
    }

    fn check(&self) -> Result<()> {
        self.coeffs.check_shape(self.grid.n_space())?;
        if self.source.grid != self.grid {
            return Err(Error::Data("source grid differs from the problem grid".into()));
        }
        if !self.source.is_finite() {
            return Err(Error::Data("source contains non-finite samples".into()));
        }
        for (name, f) in [("a", &self.coeffs.a), ("b", &self.coeffs.b), ("c", &self.coeffs.c)] {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("coefficient {name} is not finite")));
            }
        }
        if self.coeffs.a.iter().any(|&a| a <= 0.0) {
            return Err(Error::Domain("diffusion coefficient must be positive".into()));
        }
        let neg_c = self.coeffs.c.iter().fold(0.0_f64, |m, &c| m.max(-c));
        if self.grid.dt * neg_c >= self.params.rho1 {
            return Err(Error::Domain(format!(
                "time step too large for negative potential: dt * max(-c) = {:.3e} >= rho1",
                self.grid.dt * neg_c
            )));
        }
        Ok(())
    }
}

/// Advances the scheme over the whole horizon.
pub fn solve_forward(problem: &ForwardProblem) -> Result<TimeSeriesField> {
    problem.check()?;
    let grid = problem.grid;
    let (m, nt, dt) = (grid.n_space(), grid.nt, grid.dt);
    let ModelParams { rho1, rho2, .. } = problem.params;
    let l1 = CaputoScheme::new(0.5, dt, nt)?;
    let (lo, di, up) = l_stencil(&problem.coeffs, grid.dx);
    let interior = m - 2;
    let l_scale = di.iter().chain(&lo).chain(&up).fold(0.0_f64, |a, v| a.max(v.abs()));

    let mut out = SpaceTime::zeros(grid);
    // increments u^k - u^{k-1}, k = 1..n
    let mut incr: Vec<Vec<f64>> = Vec::with_capacity(nt);
    let mut hist = vec![0.0; m];
    let mut rhs = vec![0.0; interior];
    let mut mat_lo = vec![0.0; interior];
    let mut mat_di = vec![0.0; interior];
    let mut mat_up = vec![0.0; interior];

    for n in 1..=nt {
        let bdf2 = problem.stepping == TimeStepping::Bdf2 && n >= 2;
        // trapezoidal weight of the new level on the first BDF2 step
        let theta = if problem.stepping == TimeStepping::Bdf2 && n == 1 { 0.5 } else { 1.0 };
        let time_diag = if bdf2 { 1.5 * rho1 / dt } else { rho1 / dt };
        let diag_shift = time_diag + theta * rho2 * l1.diagonal();

        hist.iter_mut().for_each(|h| *h = 0.0);
        for j in 1..n {
            let w = l1.weights[j];
            for (h, d) in hist.iter_mut().zip(&incr[n - j - 1]) {
                *h += w * d;
            }
        }

        let prev = out.level(n - 1).to_vec();
        let g = problem.source.level(n);
        let g_prev = problem.source.level(n - 1);
        for k in 0..interior {
            let i = k + 1;
            let time_part = if bdf2 {
                rho1 * (4.0 * prev[i] - out.at(i, n - 2)) / (2.0 * dt)
            } else {
                rho1 * prev[i] / dt
            };
            rhs[k] = theta * (g[i] + rho2 * l1.scale * (l1.weights[0] * prev[i] - hist[i]))
                + (1.0 - theta) * g_prev[i]
                + time_part;
            mat_lo[k] = -theta * lo[i];
            mat_di[k] = diag_shift - theta * di[i];
            mat_up[k] = -theta * up[i];
        }
        let pivot_tol = 64.0 * f64::EPSILON * (time_diag + (rho2 * l1.diagonal()).abs() + l_scale);
        solve_tridiagonal(&mat_lo, &mat_di, &mat_up, &mut rhs, pivot_tol).map_err(|e| Error::Solver {
            step: n,
            detail: format!("zero pivot {:.3e} in row {}", e.pivot, e.row + 1),
        })?;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver { step: n, detail: "non-finite solution".into() });
        }
        let level = out.level_mut(n);
        level[1..m - 1].copy_from_slice(&rhs);
        let mut d = vec![0.0; m];
        for i in 1..m - 1 {
            d[i] = level[i] - prev[i];
        }
        incr.push(d);
    }
    TimeSeriesField::new(out)
}

/// Which spacing is refined between consecutive levels of a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementAxis {
    Time,
    Space,
}

/// Problem family with a closed-form solution.
pub trait ManufacturedFamily {
    fn problem(&self, grid: Grid) -> Result<ForwardProblem>;
    fn exact(&self, x: f64, t: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
    pub max_error: f64,
    /// Empirical order against the previous row, when both errors are
    /// positive.
    pub order: Option<f64>,
}

/// Max-norm errors over all space-time nodes for each `(nx, nt)` level.
pub fn convergence_study(
    family: &dyn ManufacturedFamily,
    t_final: f64,
    levels: &[(usize, usize)],
    axis: RefinementAxis,
) -> Result<Vec<ConvergenceRow>> {
    if levels.len() < 2 {
        return Err(Error::Sizing("a convergence study needs at least two levels".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
    for &(nx, nt) in levels {
        let grid = Grid::new(nx, nt, t_final)?;
        let u = solve_forward(&family.problem(grid)?)?;
        let mut err = 0.0_f64;
        for n in 0..grid.n_time() {
            let t = grid.t(n);
            for (i, v) in u.level(n).iter().enumerate() {
                err = err.max((v - family.exact(grid.x(i), t)).abs());
            }
        }
        let order = rows.last().and_then(|p| {
            let ratio = match axis {
                RefinementAxis::Time => p.dt / grid.dt,
                RefinementAxis::Space => p.dx / grid.dx,
            };
            (p.max_error > 0.0 && err > 0.0 && ratio != 1.0).then(|| (p.max_error / err).ln() / ratio.ln())
        });
        rows.push(ConvergenceRow { nx, nt, dx: grid.dx, dt: grid.dt, max_error: err, order });
    }
    Ok(rows)
}

/// `u* = t^2 sin(pi x)` for `a = 1`, `b = 0` and constant potential `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSine {
    pub rho1: f64,
    pub rho2: f64,
    pub potential: f64,
}

impl Default for QuadraticSine {
    fn default() -> Self {
        Self { rho1: 1.0, rho2: 1.0, potential: 0.0 }
    }
}

impl QuadraticSine {
    /// `g = [2 rho1 t + rho2 8/(3 sqrt(pi)) t^{3/2} + (pi^2 + c) t^2] sin(pi x)`.
    pub fn source(&self, x: f64, t: f64) -> f64 {
        let pi = std::f64::consts::PI;
        let half = 8.0 / (3.0 * pi.sqrt()) * t.powf(1.5);
        (2.0 * self.rho1 * t + self.rho2 * half + (pi * pi + self.potential) * t * t) * (pi * x).sin()
    }
}

impl ManufacturedFamily for QuadraticSine {
    fn problem(&self, grid: Grid) -> Result<ForwardProblem> {
        let params = ModelParams::with_default_window(self.rho1, self.rho2, grid.t_final)?;
        let c = self.potential;
        let coeffs = EllipticCoefficients::from_fns(&grid, |_| 1.0, |_| 0.0, |_| c);
        let source = SpaceTime::from_fn(grid, |x, t| self.source(x, t));
        Ok(ForwardProblem::new(params, coeffs, grid, source))
    }

    fn exact(&self, x: f64, t: f64) -> f64 {
        t * t * (std::f64::consts::PI * x).sin()
    }
}

/// Identically zero source and solution.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroFamily;

impl ManufacturedFamily for ZeroFamily {
    fn problem(&self, grid: Grid) -> Result<ForwardProblem> {
        let params = ModelParams::with_default_window(1.0, 1.0, grid.t_final)?;
        Ok(ForwardProblem::new(params, EllipticCoefficients::laplacian(&grid), grid, SpaceTime::zeros(grid)))
    }

    fn exact(&self, _x: f64, _t: f64) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_source_gives_zero() {
        let grid = Grid::new(31, 32, 1.0).unwrap();
        let u = solve_forward(&ZeroFamily.problem(grid).unwrap()).unwrap();
        assert!(u.samples().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn manufactured_solution_accuracy() {
        let fam = QuadraticSine::default();
        let grid = Grid::new(127, 512, 1.0).unwrap();
        let u = solve_forward(&fam.problem(grid).unwrap()).unwrap();
        let mut err = 0.0_f64;
        for n in 0..grid.n_time() {
            for i in 0..grid.n_space() {
                err = err.max((u.at(i, n) - fam.exact(grid.x(i), grid.t(n))).abs());
            }
        }
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn negative_rho2_and_potential() {
        let fam = QuadraticSine { rho1: 2.0, rho2: -0.5, potential: 3.0 };
        let grid = Grid::new(63, 256, 1.0).unwrap();
        let u = solve_forward(&fam.problem(grid).unwrap()).unwrap();
        let n = grid.nt;
        let i = 32;
        assert!((u.at(i, n) - fam.exact(grid.x(i), 1.0)).abs() < 2e-3);
    }

    #[test]
    fn study_needs_two_levels() {
        assert!(matches!(
            convergence_study(&QuadraticSine::default(), 1.0, &[(31, 32)], RefinementAxis::Time),
            Err(Error::Sizing(_))
        ));
        let rows = convergence_study(&ZeroFamily, 1.0, &[(31, 32), (63, 64)], RefinementAxis::Space).unwrap();
        assert!(rows.iter().all(|r| r.max_error == 0.0 && r.order.is_none()));
    }

    #[test]
    fn rejects_large_step_with_negative_potential() {
        let grid = Grid::new(31, 16, 1.0).unwrap();
        let params = ModelParams::with_default_window(1.0, 1.0, 1.0).unwrap();
        let coeffs = EllipticCoefficients::from_fns(&grid, |_| 1.0, |_| 0.0, |_| -40.0);
        let p = ForwardProblem::new(params, coeffs, grid, SpaceTime::zeros(grid));
        assert!(matches!(solve_forward(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn singular_step_matrix_reports_step() {
        // rho2 strongly negative makes the shifted matrix indefinite and
        // singular for a tuned step.
        let grid = Grid::new(16, 16, 1.0).unwrap();
        let dt = grid.dt;
        let l1 = CaputoScheme::new(0.5, dt, 4).unwrap();
        let rho1 = 1.0;
        let rho2 = -2.0 * (rho1 / dt) / l1.diagonal();
        let params = ModelParams::with_default_window(rho1, rho2, 1.0).unwrap();
        // with L = 0 (a tiny, c = 0) the first step matrix is ~0
        let coeffs = EllipticCoefficients::from_fns(&grid, |_| 1e-300, |_| 0.0, |_| 0.0);
        let source = SpaceTime::from_fn(grid, |x, t| t * x);
        let e = solve_forward(&ForwardProblem::new(params, coeffs, grid, source)).unwrap_err();
        assert!(matches!(e, Error::Solver { step: 1, .. }), "{e:?}");
    }

    fn smooth_source(grid: Grid, k: f64, w: f64) -> SpaceTime {
        SpaceTime::from_fn(grid, |x, t| (k * PI * x).sin() * (w * t).cos() * t + x * x * (1.0 - x))
    }

    #[test]
    fn superposition() {
        let grid = Grid::new(47, 64, 1.0).unwrap();
        let params = ModelParams::with_default_window(1.3, 0.7, 1.0).unwrap();
        let coeffs = EllipticCoefficients::from_fns(&grid, |x| 1.0 + 0.5 * x, |x| 0.3 * x, |x| 1.0 + x * x);
        let g1 = smooth_source(grid, 1.0, 3.0);
        let g2 = smooth_source(grid, 3.0, 7.0);
        let mut g12 = g1.clone();
        g12.axpy(1.0, &g2);
        let solve = |g: SpaceTime| solve_forward(&ForwardProblem::new(params, coeffs.clone(), grid, g)).unwrap();
        let (u1, u2, u12) = (solve(g1), solve(g2), solve(g12));
        let scale = u12.samples().max_abs();
        for k in 0..u12.samples().values.len() {
            let s = u1.samples().values[k] + u2.samples().values[k];
            assert!((u12.samples().values[k] - s).abs() <= 1e-12 * scale);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn nonnegative_source_keeps_solution_nonnegative(
            amp in proptest::collection::vec(0.0..1.0f64, 4),
            onset in 0.0..0.8f64,
            c0 in 0.0..5.0f64,
        ) {
            let grid = Grid::new(31, 48, 1.0).unwrap();
            let params = ModelParams::with_default_window(1.0, 0.8, 1.0).unwrap();
            let coeffs = EllipticCoefficients::from_fns(&grid, |x| 1.0 + x, |_| 0.0, |x| c0 * x);
            // rough nonnegative source, switched on abruptly
            let source = SpaceTime::from_fn(grid, |x, t| {
                if t < onset { 0.0 } else {
                    amp.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * PI * x).sin().abs()).sum()
                }
            });
            let p = ForwardProblem::new(params, coeffs.clone(), grid, source)
                .with_stepping(TimeStepping::BackwardEuler);
            let u = solve_forward(&p).unwrap();
            prop_assert!(u.samples().values.iter().all(|&v| v >= -1e-10));

            // smooth nonnegative source under the default second-order stepping
            let smooth = SpaceTime::from_fn(grid, |x, t| {
                t * t * amp.iter().enumerate().map(|(k, a)| a * (PI * x).sin().powi(k as i32 + 1)).sum::<f64>()
            });
            let u = solve_forward(&ForwardProblem::new(params, coeffs, grid, smooth)).unwrap();
            prop_assert!(u.samples().values.iter().all(|&v| v >= -1e-10));
        }
    }
}
