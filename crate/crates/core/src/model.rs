//! Grids, model parameters, coefficient fields and observation geometry on
//! the unit interval.

use crate::error::{Error, Result};

/// Uniform space-time grid on `[0, 1] x [0, T]`.
///
/// `nx` counts interior nodes, so every spatial vector carries `nx + 2`
/// samples including both Dirichlet endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
    pub dx: f64,
    pub dt: f64,
}

pub const MIN_NODES: usize = 16;

impl Grid {
    pub fn new(nx: usize, nt: usize, t_final: f64) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Sizing(format!("final time must be positive, got {t_final}")));
        }
        if nx < MIN_NODES || nt < MIN_NODES {
            return Err(Error::Sizing(format!(
                "grid needs nx >= {MIN_NODES} and nt >= {MIN_NODES}, got nx={nx}, nt={nt}"
            )));
        }
        Ok(Self { nx, nt, t_final, dx: 1.0 / (nx + 1) as f64, dt: t_final / nt as f64 })
    }

    /// Number of spatial samples, endpoints included.
    pub fn n_space(&self) -> usize {
        self.nx + 2
    }

    pub fn n_time(&self) -> usize {
        self.nt + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_space()).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.n_time()).map(|n| self.t(n)).collect()
    }

    /// Index of the time level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.nt)
    }

    /// Same grid with a different final time.
    pub fn with_final_time(&self, t_final: f64) -> Result<Self> {
        Self::new(self.nx, self.nt, t_final)
    }
}

/// Constants of the time part `rho1 d_t + rho2 d_t^{1/2}` plus the
/// observation window `(t0 - delta, t0 + delta)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub rho1: f64,
    pub rho2: f64,
    pub t_final: f64,
    pub t0: f64,
    pub delta: f64,
}

impl ModelParams {
    pub fn new(rho1: f64, rho2: f64, t_final: f64, t0: f64, delta: f64) -> Result<Self> {
        let p = Self { rho1, rho2, t_final, t0, delta };
        p.validate()?;
        Ok(p)
    }

    /// Default window `t0 = T/2`, `delta = T/4`.
    pub fn with_default_window(rho1: f64, rho2: f64, t_final: f64) -> Result<Self> {
        Self::new(rho1, rho2, t_final, 0.5 * t_final, 0.25 * t_final)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rho1, self.rho2, self.t_final, self.t0, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        if self.rho1 <= 0.0 {
            return Err(Error::Domain(format!("rho1 must be positive, got {}", self.rho1)));
        }
        if self.rho2 == 0.0 {
            return Err(Error::Domain("rho2 must be nonzero".into()));
        }
        if self.t_final <= 0.0 {
            return Err(Error::Domain(format!("T must be positive, got {}", self.t_final)));
        }
        let lo = self.t0 - self.delta;
        let hi = self.t0 + self.delta;
        if !(0.0 < lo && lo < self.t0 && self.t0 < hi && hi < self.t_final) {
            return Err(Error::Domain(format!(
                "window must satisfy 0 < t0-delta < t0 < t0+delta < T, got t0={}, delta={}, T={}",
                self.t0, self.delta, self.t_final
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t0 - self.delta, self.t0 + self.delta)
    }
}

/// Node samples of `a` (diffusion), `b` (drift) and `c` (potential) defining
/// `L u = (a u')' - b u' - c u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// Outcome of the ellipticity check.
#[derive(Debug, Clone, PartialEq)]
pub enum EllipticityDiagnostic {
    Pass,
    Fail { node: usize, x: f64, value: f64, lower: f64, upper: f64 },
}

impl EllipticityDiagnostic {
    pub fn passed(&self) -> bool {
        matches!(self, Self::Pass)
    }
}

impl EllipticCoefficients {
    pub fn from_fns(
        grid: &Grid,
        a: impl Fn(f64) -> f64,
        b: impl Fn(f64) -> f64,
        c: impl Fn(f64) -> f64,
    ) -> Self {
        let xs = grid.xs();
        Self {
            a: xs.iter().map(|&x| a(x)).collect(),
            b: xs.iter().map(|&x| b(x)).collect(),
            c: xs.iter().map(|&x| c(x)).collect(),
        }
    }

    /// `a = 1`, `b = c = 0`.
    pub fn laplacian(grid: &Grid) -> Self {
        Self::from_fns(grid, |_| 1.0, |_| 0.0, |_| 0.0)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn check_shape(&self, n: usize) -> Result<()> {
        if self.a.len() != n || self.b.len() != n || self.c.len() != n {
            return Err(Error::Data(format!(
                "coefficient fields have lengths ({}, {}, {}), expected {n}",
                self.a.len(),
                self.b.len(),
                self.c.len()
            )));
        }
        Ok(())
    }

    /// Checks `1/mu <= a(x) <= mu` at every node and reports the worst
    /// offender.
    pub fn validate(&self, mu: f64, dx: f64) -> Result<EllipticityDiagnostic> {
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        for (name, field) in [("a", &self.a), ("b", &self.b), ("c", &self.c)] {
            if let Some(i) = field.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("coefficient {name} is not finite at node {i}")));
            }
        }
        let (lower, upper) = (1.0 / mu, mu);
        let mut worst: Option<(usize, f64)> = None;
        for (i, &v) in self.a.iter().enumerate() {
            let excess = (lower - v).max(v - upper);
            if excess > 0.0 && worst.is_none_or(|(_, e)| excess > e) {
                worst = Some((i, excess));
            }
        }
        Ok(match worst {
            None => EllipticityDiagnostic::Pass,
            Some((node, _)) => EllipticityDiagnostic::Fail {
                node,
                x: node as f64 * dx,
                value: self.a[node],
                lower,
                upper,
            },
        })
    }
}

/// Endpoint carrying the lateral observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn x(self) -> f64 {
        match self {
            Side::Left => 0.0,
            Side::Right => 1.0,
        }
    }

    /// Outward normal at this endpoint.
    pub fn normal(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Open subinterval `(lo, hi)` of the unit interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn contains_closed(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Compact inclusion: the closure of `self` lies inside `outer`.
    pub fn compactly_inside(&self, outer: &Interval) -> bool {
        self.lo < self.hi && outer.lo < self.lo && self.hi < outer.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

const UNIT: Interval = Interval::new(0.0, 1.0);

/// Observation layout: the sub-boundary `gamma`, the interior patch `omega`,
/// the inner patch `omega0` used by the interior weight, and `d_prime`, the
/// complement of the region where coefficient differences vanish.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationGeometry {
    pub gamma: Side,
    pub omega: Interval,
    pub omega0: Interval,
    pub d_prime: Interval,
}

impl Default for ObservationGeometry {
    fn default() -> Self {
        Self {
            gamma: Side::Right,
            omega: Interval::new(0.4, 0.6),
            omega0: Interval::new(0.45, 0.55),
            d_prime: Interval::new(0.1, 0.9),
        }
    }
}

impl ObservationGeometry {
    pub fn new(gamma: Side, omega: Interval, omega0: Interval, d_prime: Interval) -> Result<Self> {
        let g = Self { gamma, omega, omega0, d_prime };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega0.compactly_inside(&self.omega) {
            return Err(Error::Geometry(format!(
                "omega0 = ({}, {}) is not compactly contained in omega = ({}, {})",
                self.omega0.lo, self.omega0.hi, self.omega.lo, self.omega.hi
            )));
        }
        if !self.omega.compactly_inside(&self.d_prime) {
            return Err(Error::Geometry(format!(
                "omega = ({}, {}) is not compactly contained in D' = ({}, {})",
                self.omega.lo, self.omega.hi, self.d_prime.lo, self.d_prime.hi
            )));
        }
        if !self.d_prime.compactly_inside(&UNIT) {
            return Err(Error::Geometry(format!(
                "D' = ({}, {}) is not compactly contained in (0, 1)",
                self.d_prime.lo, self.d_prime.hi
            )));
        }
        Ok(())
    }

    /// True when `x` lies in `D = (0,1) \ D'`, where coefficient
    /// differences must vanish.
    pub fn in_outer_region(&self, x: f64) -> bool {
        !self.d_prime.contains(x)
    }
}

/// Row-major space-time samples `values[n * n_space + i] = u(x_i, t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTime {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl SpaceTime {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n_space() * grid.n_time()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for n in 0..grid.n_time() {
            let t = grid.t(n);
            for (i, v) in out.level_mut(n).iter_mut().enumerate() {
                *v = f(grid.x(i), t);
            }
        }
        out
    }

    /// Separable product `space(x) * time(t)`.
    pub fn separable(grid: Grid, space: &[f64], time: &[f64]) -> Result<Self> {
        if space.len() != grid.n_space() || time.len() != grid.n_time() {
            return Err(Error::Data("separable factors do not match the grid".into()));
        }
        let mut out = Self::zeros(grid);
        for (n, &tn) in time.iter().enumerate() {
            for (v, &s) in out.level_mut(n).iter_mut().zip(space) {
                *v = s * tn;
            }
        }
        Ok(out)
    }

    pub fn at(&self, i: usize, n: usize) -> f64 {
        self.values[n * self.grid.n_space() + i]
    }

    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.grid.n_space();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut [f64] {
        let m = self.grid.n_space();
        &mut self.values[n * m..(n + 1) * m]
    }

    /// Time series at spatial node `i`.
    pub fn node_series(&self, i: usize) -> Vec<f64> {
        (0..self.grid.n_time()).map(|n| self.at(i, n)).collect()
    }

    pub fn set_node_series(&mut self, i: usize, series: &[f64]) {
        let m = self.grid.n_space();
        for (n, &v) in series.iter().enumerate() {
            self.values[n * m + i] = v;
        }
    }

    /// Applies `f` to every level, producing a field of the same shape.
    pub fn map_levels(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(self.grid);
        for n in 0..self.grid.n_time() {
            let row = f(n, self.level(n));
            out.level_mut(n).copy_from_slice(&row);
        }
        out
    }

    /// Applies `f` to every node time series.
    pub fn map_series(&self, mut f: impl FnMut(usize, &[f64]) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(self.grid);
        for i in 0..self.grid.n_space() {
            let s = f(i, &self.node_series(i));
            out.set_node_series(i, &s);
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| k * v).collect() }
    }

    pub fn axpy(&mut self, k: f64, other: &SpaceTime) {
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += k * o;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Solution `u(x_i, t_n)` with homogeneous Dirichlet data and zero initial
/// state.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesField {
    samples: SpaceTime,
    pub homogeneous_dirichlet: bool,
}

impl TimeSeriesField {
    /// Wraps samples, checking that the boundary columns and the first level
    /// vanish.
    pub fn new(samples: SpaceTime) -> Result<Self> {
        let m = samples.grid.n_space();
        if samples.values.len() != m * samples.grid.n_time() {
            return Err(Error::Data("sample count does not match the grid".into()));
        }
        for n in 0..samples.grid.n_time() {
            let row = samples.level(n);
            if row[0] != 0.0 || row[m - 1] != 0.0 {
                return Err(Error::Data(format!("boundary value nonzero at level {n}")));
            }
        }
        if samples.level(0).iter().any(|&v| v != 0.0) {
            return Err(Error::Data("initial level is not zero".into()));
        }
        Ok(Self { samples, homogeneous_dirichlet: true })
    }

    pub fn grid(&self) -> &Grid {
        &self.samples.grid
    }

    pub fn samples(&self) -> &SpaceTime {
        &self.samples
    }

    pub fn into_samples(self) -> SpaceTime {
        self.samples
    }

    pub fn level(&self, n: usize) -> &[f64] {
        self.samples.level(n)
    }

    pub fn at(&self, i: usize, n: usize) -> f64 {
        self.samples.at(i, n)
    }
}
