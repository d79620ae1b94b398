//! Distance functions, Carleman weights `phi = e^{lambda d} / l(t)`,
//! `psi = (e^{lambda d} - e^{2 lambda |d|}) / l(t)`, weighted integrals and
//! empirical ratio scans of the Carleman inequalities.

mod scan;

pub use scan::{
    carleman_scan, default_s_grid, default_scan, scan_all, LemmaId, RatioScanResult, ScanInput,
    ScanResolution, TestField, DEFAULT_LAMBDAS,
};

use crate::error::{Error, Result};
use crate::model::{EllipticCoefficients, Grid, ObservationGeometry, Side};

/// `e^{2 s psi}` relative to its maximum is flushed to zero below this.
pub const LOG_FLUSH: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    /// `d1`, increasing towards the observed endpoint.
    Boundary,
    /// `d2 = x (1 - x)`, peaked inside the observation interval.
    Interior,
}

#[derive(Debug, Clone)]
pub struct DistanceFunction {
    pub kind: DistanceKind,
    /// Lower bound on `|d'|` over the region where the lemma needs it.
    pub sigma: f64,
    pub geometry: ObservationGeometry,
    /// Samples at the grid nodes, endpoints included.
    pub samples: Vec<f64>,
}

impl DistanceFunction {
    pub fn value(&self, x: f64) -> f64 {
        match (self.kind, self.geometry.gamma) {
            (DistanceKind::Boundary, Side::Right) => x + 1.0,
            (DistanceKind::Boundary, Side::Left) => 2.0 - x,
            (DistanceKind::Interior, _) => x * (1.0 - x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match (self.kind, self.geometry.gamma) {
            (DistanceKind::Boundary, Side::Right) => 1.0,
            (DistanceKind::Boundary, Side::Left) => -1.0,
            (DistanceKind::Interior, _) => 1.0 - 2.0 * x,
        }
    }

    /// `max |d|` over the closed interval.
    pub fn sup_norm(&self) -> f64 {
        match self.kind {
            DistanceKind::Boundary => 2.0,
            DistanceKind::Interior => 0.25,
        }
    }

    /// Whether `x` belongs to the region where `|d'| > sigma` is required.
    pub fn gradient_region(&self, x: f64) -> bool {
        match self.kind {
            DistanceKind::Boundary => true,
            DistanceKind::Interior => !self.geometry.omega0.contains(x),
        }
    }

    /// Checks positivity inside, the gradient bound on its region, zero
    /// endpoint values for `d2`, and the sign condition `a d' nu <= 0` at the
    /// unobserved endpoint for `d1`.
    pub fn check_invariants(&self, grid: &Grid, coeffs: &EllipticCoefficients) -> Result<()> {
        coeffs.check_shape(grid.n_space())?;
        let tol = 1e-12;
        for i in 0..grid.n_space() {
            let x = grid.x(i);
            let d = self.value(x);
            let interior = i > 0 && i + 1 < grid.n_space();
            if interior && d <= 0.0 {
                return Err(Error::Geometry(format!("distance function not positive at x = {x:.4}")));
            }
            if self.gradient_region(x) && self.derivative(x).abs() < self.sigma - tol {
                return Err(Error::Geometry(format!(
                    "|d'| = {:.4} below sigma = {:.4} at x = {x:.4}",
                    self.derivative(x).abs(),
                    self.sigma
                )));
            }
        }
        match self.kind {
            DistanceKind::Interior => {
                if self.value(0.0) != 0.0 || self.value(1.0) != 0.0 {
                    return Err(Error::Geometry("d2 must vanish at both endpoints".into()));
                }
            }
            DistanceKind::Boundary => {
                let free = self.geometry.gamma.opposite();
                let i = if free == Side::Left { 0 } else { grid.n_space() - 1 };
                let flux = coeffs.a[i] * self.derivative(free.x()) * free.normal();
                if flux > 0.0 {
                    return Err(Error::Geometry(format!("a d1' nu = {flux:.4} > 0 at the unobserved endpoint")));
                }
            }
        }
        Ok(())
    }
}

fn sample(mut d: DistanceFunction, grid: &Grid) -> DistanceFunction {
    d.samples = grid.xs().iter().map(|&x| d.value(x)).collect();
    d
}

/// `d1(x) = x + 1` for observation at the right endpoint, `2 - x` for the
/// left one.
pub fn build_d1(geometry: &ObservationGeometry, grid: &Grid) -> DistanceFunction {
    let d = DistanceFunction { kind: DistanceKind::Boundary, sigma: 0.99, geometry: *geometry, samples: Vec::new() };
    sample(d, grid)
}

/// `d2(x) = x (1 - x)`; its critical point `1/2` must lie in `omega0`.
pub fn build_d2(geometry: &ObservationGeometry, grid: &Grid) -> Result<DistanceFunction> {
    let w0 = geometry.omega0;
    if !w0.contains(0.5) {
        return Err(Error::Geometry(format!(
            "critical point 0.5 of d2 lies outside omega0 = ({}, {})",
            w0.lo, w0.hi
        )));
    }
    let sigma = (1.0 - 2.0 * w0.lo).abs().min((1.0 - 2.0 * w0.hi).abs());
    let d = DistanceFunction { kind: DistanceKind::Interior, sigma, geometry: *geometry, samples: Vec::new() };
    Ok(sample(d, grid))
}

/// Time factor of the weights.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightWindow {
    /// `l(t) = t (T - t)` on `(0, T)`.
    Full { t_final: f64 },
    /// `l(t) = (t - t0 + delta)(t0 + delta - t)` on `(t0 - delta, t0 + delta)`.
    Delta { t0: f64, delta: f64 },
}

impl WeightWindow {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            WeightWindow::Full { t_final } => (0.0, t_final),
            WeightWindow::Delta { t0, delta } => (t0 - delta, t0 + delta),
        }
    }

    pub fn ell(&self, t: f64) -> f64 {
        let (lo, hi) = self.bounds();
        (t - lo) * (hi - t)
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.bounds();
        t > lo && t < hi
    }

    /// Largest value of `l`, attained at the window center.
    pub fn ell_max(&self) -> f64 {
        let (lo, hi) = self.bounds();
        0.25 * (hi - lo) * (hi - lo)
    }
}

#[derive(Debug, Clone)]
pub struct CarlemanWeights {
    pub d: DistanceFunction,
    pub lambda: f64,
    pub s: f64,
    pub window: WeightWindow,
}

impl CarlemanWeights {
    pub fn new(d: DistanceFunction, lambda: f64, s: f64, window: WeightWindow) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda} (degenerate weights)")));
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Domain(format!("s must be positive, got {s}")));
        }
        Ok(Self { d, lambda, s, window })
    }

    /// `(phi, psi)` at `(x, t)`; `t` must lie strictly inside the window.
    pub fn eval(&self, x: f64, t: f64) -> Result<(f64, f64)> {
        if !self.window.contains(t) {
            let (lo, hi) = self.window.bounds();
            return Err(Error::Domain(format!("t = {t} is not inside the weight window ({lo}, {hi})")));
        }
        let ell = self.window.ell(t);
        Ok(weights_from_distance(self.d.value(x), self.d.sup_norm(), self.lambda, ell))
    }

    /// Largest value of `psi` over the closed interval and window.
    pub fn psi_max(&self) -> f64 {
        let norm = self.d.sup_norm();
        let top = (self.lambda * norm).exp() - (2.0 * self.lambda * norm).exp();
        top / self.window.ell_max()
    }
}

/// `(e^{lambda d} / l, (e^{lambda d} - e^{2 lambda |d|}) / l)`.
pub fn weights_from_distance(d: f64, d_norm: f64, lambda: f64, ell: f64) -> (f64, f64) {
    let e = (lambda * d).exp();
    (e / ell, (e - (2.0 * lambda * d_norm).exp()) / ell)
}

/// A weighted integral `int (s phi)^p |E|^2 e^{2 s psi}` stored as
/// `scaled * exp(log_scale)` to survive the extreme range of `e^{2 s psi}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedValue {
    pub scaled: f64,
    pub log_scale: f64,
}

impl WeightedValue {
    pub fn value(&self) -> f64 {
        self.scaled * self.log_scale.exp()
    }
}

/// Trapezoidal space-time quadrature of `(s phi)^power |field|^2 e^{2 s psi}`
/// over the grid nodes strictly inside the weight window. The result is
/// normalized by `exp(2 s psi_max)`; contributions whose normalized weight
/// falls below `exp(LOG_FLUSH)` count as zero.
pub fn weighted_integral(
    field: &crate::model::SpaceTime,
    weights: &CarlemanWeights,
    power: f64,
) -> WeightedValue {
    let grid = field.grid;
    let (s, lambda) = (weights.s, weights.lambda);
    let psi_ref = weights.psi_max();
    let d_norm = weights.d.sup_norm();
    let wx = crate::quadrature::trapezoid_weights(grid.n_space(), grid.dx);
    let wt = crate::quadrature::trapezoid_weights(grid.n_time(), grid.dt);
    let mut acc = 0.0;
    for n in 0..grid.n_time() {
        let t = grid.t(n);
        if !weights.window.contains(t) {
            continue;
        }
        let ell = weights.window.ell(t);
        for i in 0..grid.n_space() {
            let v = field.at(i, n);
            if v == 0.0 {
                continue;
            }
            let (phi, psi) = weights_from_distance(weights.d.value(grid.x(i)), d_norm, lambda, ell);
            let log = power * (s * phi).ln() + 2.0 * s * (psi - psi_ref);
            if log < LOG_FLUSH {
                continue;
            }
            acc += wt[n] * wx[i] * v * v * log.exp();
        }
    }
    WeightedValue { scaled: acc, log_scale: 2.0 * s * psi_ref }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Interval, SpaceTime};

    fn grid() -> Grid {
        Grid::new(63, 64, 1.0).unwrap()
    }

    #[test]
    fn d1_values() {
        let g = grid();
        let right = build_d1(&ObservationGeometry::default(), &g);
        assert_eq!(right.value(0.5), 1.5);
        assert_eq!(right.derivative(0.3).abs(), 1.0);
        let mut geo = ObservationGeometry::default();
        geo.gamma = Side::Left;
        let left = build_d1(&geo, &g);
        assert_eq!(left.value(0.5), 1.5);
        assert_eq!(left.value(0.0), 2.0);
        let coeffs = EllipticCoefficients::laplacian(&g);
        right.check_invariants(&g, &coeffs).unwrap();
        left.check_invariants(&g, &coeffs).unwrap();
        let flux = coeffs.a[0] * right.derivative(0.0) * Side::Left.normal();
        assert_eq!(flux, -1.0);
    }

    #[test]
    fn d2_values() {
        let g = grid();
        let d2 = build_d2(&ObservationGeometry::default(), &g).unwrap();
        assert_eq!(d2.value(0.5), 0.25);
        assert_eq!(d2.value(0.0), 0.0);
        assert_eq!(d2.value(1.0), 0.0);
        assert!((d2.derivative(0.45).abs() - 0.1).abs() < 1e-15);
        assert!((d2.sigma - 0.1).abs() < 1e-15);
        d2.check_invariants(&g, &EllipticCoefficients::laplacian(&g)).unwrap();

        let mut geo = ObservationGeometry::default();
        geo.omega0 = Interval::new(0.1, 0.2);
        assert!(matches!(build_d2(&geo, &g), Err(Error::Geometry(_))));
    }

    #[test]
    fn hand_evaluated_weights() {
        let (phi, psi) = weights_from_distance(1.0, 1.0, 2.0, 0.25);
        assert!((phi - 4.0 * 2f64.exp()).abs() < 1e-12);
        assert!((phi - 29.556).abs() < 1e-3);
        assert!((psi - 4.0 * (2f64.exp() - 4f64.exp())).abs() < 1e-9);
        assert!((psi + 188.84).abs() < 1e-2);
    }

    #[test]
    fn eval_rejects_window_ends_and_degenerate_lambda() {
        let g = grid();
        let d = build_d1(&ObservationGeometry::default(), &g);
        let w = CarlemanWeights::new(d.clone(), 2.0, 1.0, WeightWindow::Full { t_final: 1.0 }).unwrap();
        assert!(matches!(w.eval(0.5, 0.0), Err(Error::Domain(_))));
        assert!(matches!(w.eval(0.5, 1.0), Err(Error::Domain(_))));
        let (phi, psi) = w.eval(0.5, 0.5).unwrap();
        assert!(phi > 0.0 && psi < 0.0);
        assert!(matches!(
            CarlemanWeights::new(d, 0.0, 1.0, WeightWindow::Full { t_final: 1.0 }),
            Err(Error::Domain(_))
        ));
        let (phi0, psi0) = weights_from_distance(0.7, 2.0, 0.0, 0.25);
        assert_eq!((phi0, psi0), (4.0, 0.0));
    }

    #[test]
    fn delta_window_peaks_at_t0() {
        let g = Grid::new(31, 200, 1.0).unwrap();
        let geo = ObservationGeometry::default();
        for d in [build_d1(&geo, &g), build_d2(&geo, &g).unwrap()] {
            let w = CarlemanWeights::new(d, 2.0, 3.0, WeightWindow::Delta { t0: 0.5, delta: 0.25 }).unwrap();
            for i in 0..g.n_space() {
                let x = g.x(i);
                let (_, at_t0) = w.eval(x, 0.5).unwrap();
                for n in 0..g.n_time() {
                    let t = g.t(n);
                    if w.window.contains(t) {
                        let (phi, psi) = w.eval(x, t).unwrap();
                        assert!(phi > 0.0 && psi < 0.0);
                        assert!(at_t0 >= psi);
                    }
                }
            }
        }
    }

    #[test]
    fn weighted_integral_basics() {
        let g = grid();
        let d = build_d1(&ObservationGeometry::default(), &g);
        let window = WeightWindow::Full { t_final: 1.0 };
        let w = CarlemanWeights::new(d.clone(), 1.0, 0.1, window).unwrap();
        let zero = weighted_integral(&SpaceTime::zeros(g), &w, 0.0);
        assert_eq!(zero.value(), 0.0);
        let ones = SpaceTime::from_fn(g, |_, _| 1.0);
        let v = weighted_integral(&ones, &w, 0.0).value();
        assert!(v > 0.0 && v.is_finite());

        let mut prev = f64::INFINITY;
        for s in [0.05, 0.1, 0.2, 0.4] {
            let w = CarlemanWeights::new(d.clone(), 1.0, s, window).unwrap();
            let v = weighted_integral(&ones, &w, 0.0).value();
            assert!(v < prev, "{s}: {v} >= {prev}");
            prev = v;
        }
    }

    #[test]
    fn normalized_integral_survives_large_parameters() {
        let g = grid();
        let d = build_d1(&ObservationGeometry::default(), &g);
        let w = CarlemanWeights::new(d, 4.0, 100.0, WeightWindow::Full { t_final: 1.0 }).unwrap();
        let f = SpaceTime::from_fn(g, |x, t| x * t);
        let v = weighted_integral(&f, &w, 3.0);
        assert!(v.scaled > 0.0 && v.scaled.is_finite());
        assert_eq!(v.value(), 0.0);
    }
}
