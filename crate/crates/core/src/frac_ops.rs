//! Gamma function, L1 discretization of the Caputo derivative, the
//! elliptic operator and discrete Sobolev norms.

use crate::error::{Error, Result};
use crate::model::EllipticCoefficients;
use crate::quadrature::trapezoid;
use crate::stencil::Differentiator;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function for positive arguments (Lanczos approximation with
/// reflection below 1/2).
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma requires a positive finite argument, got {x}")));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_pos(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (k, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + k as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// L1 scheme for a Caputo derivative of order `beta` in `(0, 1)`:
///
/// `d^beta u(t_n) ~ scale * sum_{j<n} b_j (u_{n-j} - u_{n-j-1})`,
/// `b_j = (j+1)^{1-beta} - j^{1-beta}`, `scale = dt^{-beta} / Gamma(2-beta)`.
#[derive(Debug, Clone)]
pub struct CaputoScheme {
    pub beta: f64,
    pub dt: f64,
    pub scale: f64,
    pub weights: Vec<f64>,
}

impl CaputoScheme {
    pub fn new(beta: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Domain(format!("Caputo order must lie in (0, 1), got {beta}")));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let e = 1.0 - beta;
        let weights = (0..steps.max(1))
            .map(|j| ((j + 1) as f64).powf(e) - (j as f64).powf(e))
            .collect();
        Ok(Self { beta, dt, scale: dt.powf(-beta) / gamma_pos(2.0 - beta), weights })
    }

    /// Coefficient multiplying the newest level `u_n`.
    pub fn diagonal(&self) -> f64 {
        self.scale * self.weights[0]
    }

    /// Applies the scheme to a series sampled from `t = 0`. The value at
    /// `t_0` is defined as zero.
    pub fn apply(&self, series: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; series.len()];
        let diffs: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
        for n in 1..series.len() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.weights[j] * diffs[n - j - 1];
            }
            out[n] = self.scale * acc;
        }
        out
    }
}

/// L1 approximation of the Caputo derivative of order `beta`.
pub fn caputo(series: &[f64], beta: f64, dt: f64) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::Sizing("Caputo derivative needs at least two samples".into()));
    }
    Ok(CaputoScheme::new(beta, dt, series.len())?.apply(series))
}

/// `d_t^{m + 1/2} u`, obtained as the half-order Caputo derivative of the
/// `m`-th time derivative (second-order differences).
pub fn caputo_half_of_derivative(series: &[f64], m: usize, dt: f64) -> Result<Vec<f64>> {
    if m == 0 {
        return caputo(series, 0.5, dt);
    }
    if series.len() < m + 3 {
        return Err(Error::Sizing(format!(
            "{} samples are too few for {m} time derivatives",
            series.len()
        )));
    }
    let d = Differentiator::second_order(series.len(), dt, m)?;
    caputo(&d.apply(series), 0.5, dt)
}

/// `L u = (a u')' - b u' - c u` at interior nodes (conservative flux form,
/// face values by arithmetic mean). Endpoint entries are zero.
pub fn apply_l(u: &[f64], coeffs: &EllipticCoefficients, dx: f64) -> Result<Vec<f64>> {
    let n = u.len();
    coeffs.check_shape(n)?;
    if n < 3 {
        return Err(Error::Sizing("elliptic operator needs at least three nodes".into()));
    }
    let mut out = vec![0.0; n];
    let inv2 = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        let ap = 0.5 * (coeffs.a[i] + coeffs.a[i + 1]);
        let am = 0.5 * (coeffs.a[i - 1] + coeffs.a[i]);
        let flux = (ap * (u[i + 1] - u[i]) - am * (u[i] - u[i - 1])) * inv2;
        let du = (u[i + 1] - u[i - 1]) / (2.0 * dx);
        out[i] = flux - coeffs.b[i] * du - coeffs.c[i] * u[i];
    }
    Ok(out)
}

/// Tridiagonal entries `(lower, diag, upper)` of the interior rows of
/// [`apply_l`], indexed by node.
pub fn l_stencil(coeffs: &EllipticCoefficients, dx: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = coeffs.len();
    let inv2 = 1.0 / (dx * dx);
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for i in 1..n - 1 {
        let ap = 0.5 * (coeffs.a[i] + coeffs.a[i + 1]);
        let am = 0.5 * (coeffs.a[i - 1] + coeffs.a[i]);
        let adv = coeffs.b[i] / (2.0 * dx);
        lo[i] = am * inv2 + adv;
        di[i] = -(ap + am) * inv2 - coeffs.c[i];
        up[i] = ap * inv2 - adv;
    }
    (lo, di, up)
}

/// Precomputed elliptic operator in non-conservative form
/// `a u'' + (a' - b) u' - c u`, valid at every node including the endpoints
/// (one-sided stencils there).
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    d1: Differentiator,
    d2: Differentiator,
    a: Vec<f64>,
    drift: Vec<f64>,
    c: Vec<f64>,
}

impl EllipticOperator {
    pub fn new(coeffs: &EllipticCoefficients, dx: f64, accuracy: usize) -> Result<Self> {
        let n = coeffs.len();
        coeffs.check_shape(n)?;
        let d1 = Differentiator::new(n, dx, 1, accuracy)?;
        let d2 = Differentiator::new(n, dx, 2, accuracy)?;
        let da = d1.apply(&coeffs.a);
        let drift = da.iter().zip(&coeffs.b).map(|(d, b)| d - b).collect();
        Ok(Self { d1, d2, a: coeffs.a.clone(), drift, c: coeffs.c.clone() })
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let du = self.d1.apply(u);
        let ddu = self.d2.apply(u);
        (0..u.len())
            .map(|i| self.a[i] * ddu[i] + self.drift[i] * du[i] - self.c[i] * u[i])
            .collect()
    }
}

/// Highest derivative order supported by [`discrete_sobolev_norm`].
pub const MAX_SOBOLEV_ORDER: usize = 5;

/// `sqrt(sum_{j<=k} ||D^j f||^2)` with second-order differences (central
/// inside, one-sided at the ends) and trapezoidal quadrature.
pub fn discrete_sobolev_norm(field: &[f64], k: usize, dx: f64) -> Result<f64> {
    Ok(sobolev_terms(field, k, dx)?.iter().sum::<f64>().sqrt())
}

/// Individual squared seminorms `||D^j f||^2`, `j = 0..=k`.
pub fn sobolev_terms(field: &[f64], k: usize, dx: f64) -> Result<Vec<f64>> {
    if k > MAX_SOBOLEV_ORDER {
        return Err(Error::UnsupportedOrder(k));
    }
    let n = field.len();
    if n < 4 * k.max(1) + 2 {
        return Err(Error::Sizing(format!("{n} nodes are too few for an order-{k} Sobolev norm")));
    }
    (0..=k)
        .map(|j| {
            let d = Differentiator::second_order(n, dx, j)?;
            let dj = d.apply(field);
            Ok(trapezoid(&dj.iter().map(|v| v * v).collect::<Vec<_>>(), dx))
        })
        .collect()
}
