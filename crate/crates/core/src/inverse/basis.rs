//! Constrained bases for the unknown spatial factor. Every basis function
//! already satisfies the support and boundary constraints, so any linear
//! combination does too.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{Grid, Interval, ObservationGeometry};
use crate::stencil::Differentiator;

use super::ObservationKind;

pub const DEFAULT_BASIS_SIZE: usize = 12;

/// Dilation of `omega` beyond which the interior cutoff equals one.
pub const CUTOFF_MARGIN: f64 = 0.1;

/// Node samples `functions[k][i] = psi_k(x_i)` together with the
/// difference order of the smoothness penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub grid: Grid,
    pub functions: Vec<Vec<f64>>,
    pub penalty_order: usize,
}

impl Basis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// `sum_k c_k psi_k` at the grid nodes.
    pub fn combine(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.n_space()];
        for (psi, &c) in self.functions.iter().zip(coefficients) {
            for (o, p) in out.iter_mut().zip(psi) {
                *o += c * p;
            }
        }
        out
    }

    /// Rows `sqrt(dx) D^m psi_k(x_i)`, one per node, so that `|W c|^2`
    /// approximates the squared `H^m` seminorm.
    pub fn penalty_matrix(&self) -> Result<nalgebra::DMatrix<f64>> {
        let n = self.grid.n_space();
        let d = Differentiator::new(n, self.grid.dx, self.penalty_order, 2)?;
        let w = self.grid.dx.sqrt();
        let cols: Vec<Vec<f64>> = self.functions.iter().map(|f| d.apply(f)).collect();
        Ok(nalgebra::DMatrix::from_fn(n, self.len(), |i, k| w * cols[k][i]))
    }
}

/// Quintic smoothstep, `C^2` across both ends.
fn smoothstep_c2(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// `C^2` cutoff vanishing on `omega` and equal to one outside its
/// `margin`-dilation.
pub fn interior_cutoff(x: f64, omega: &Interval, margin: f64) -> f64 {
    let dist = (omega.lo - x).max(x - omega.hi).max(0.0);
    smoothstep_c2(dist / margin)
}

/// Source basis: `sin(pi x) sin(k pi x)` for the boundary kind (vanishing
/// values and slopes at both ends), `sin(k pi x) w(x)` for the interior kind.
pub fn source_basis(
    grid: &Grid,
    kind: ObservationKind,
    geometry: &ObservationGeometry,
    size: usize,
) -> Result<Basis> {
    if size == 0 {
        return Err(Error::Sizing("basis needs at least one function".into()));
    }
    let xs = grid.xs();
    let functions = (1..=size)
        .map(|k| {
            let kf = k as f64;
            xs.iter()
                .map(|&x| match kind {
                    ObservationKind::Boundary => (PI * x).sin() * (kf * PI * x).sin(),
                    ObservationKind::Interior => {
                        (kf * PI * x).sin() * interior_cutoff(x, &geometry.omega, CUTOFF_MARGIN)
                    }
                })
                .collect()
        })
        .collect();
    Ok(Basis { grid: *grid, functions, penalty_order: 2 })
}

/// Cardinal quintic B-spline supported on `[0, 6]`, `C^4`.
pub fn quintic_bspline(u: f64) -> f64 {
    if u <= 0.0 || u >= 6.0 {
        return 0.0;
    }
    const BINOM: [f64; 7] = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0];
    let mut sum = 0.0;
    for (j, b) in BINOM.iter().enumerate() {
        let r = u - j as f64;
        if r > 0.0 {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * b * r.powi(5);
        }
    }
    sum / 120.0
}

fn splines_on(interval: Interval, count: usize, xs: &[f64]) -> Vec<Vec<f64>> {
    let h = interval.length() / (count + 5) as f64;
    (0..count)
        .map(|k| xs.iter().map(|&x| quintic_bspline((x - interval.lo) / h - k as f64)).collect())
        .collect()
}

/// Diffusion basis: uniform quintic B-splines whose supports lie in `D'`
/// (boundary kind) or in the two components of `D' \ omega` (interior kind,
/// split evenly).
pub fn diffusion_basis(
    grid: &Grid,
    kind: ObservationKind,
    geometry: &ObservationGeometry,
    size: usize,
) -> Result<Basis> {
    let xs = grid.xs();
    let functions = match kind {
        ObservationKind::Boundary => {
            if size == 0 {
                return Err(Error::Sizing("basis needs at least one function".into()));
            }
            splines_on(geometry.d_prime, size, &xs)
        }
        ObservationKind::Interior => {
            if size < 2 {
                return Err(Error::Sizing("interior diffusion basis needs at least two functions".into()));
            }
            let left = size / 2;
            let mut f = splines_on(Interval::new(geometry.d_prime.lo, geometry.omega.lo), left, &xs);
            f.extend(splines_on(Interval::new(geometry.omega.hi, geometry.d_prime.hi), size - left, &xs));
            f
        }
    };
    let covered = functions.iter().filter(|f| f.iter().any(|&v| v != 0.0)).count();
    if covered < functions.len() {
        return Err(Error::Sizing("grid too coarse to resolve every basis function".into()));
    }
    Ok(Basis { grid: *grid, functions, penalty_order: 3 })
}
