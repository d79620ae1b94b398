use rayon::prelude::*;

use super::{build_d1, build_d2, weights_from_distance, DistanceFunction, DistanceKind, LOG_FLUSH};
use crate::error::{Error, Result};
use crate::frac_ops::{caputo, EllipticOperator};
use crate::model::{EllipticCoefficients, Grid, ModelParams, ObservationGeometry, Side, SpaceTime};
use crate::quadrature::{trapezoid_weights, trapezoid_weights_between};
use crate::stencil::Differentiator;

const ACCURACY: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaId {
    ParabolicB,
    ParabolicI,
    EllipticB,
    EllipticI,
    FirstOrderB,
    FirstOrderI,
    ThirdOrderB,
    ThirdOrderI,
    MainB,
    MainI,
}

impl LemmaId {
    pub const ALL: [LemmaId; 10] = [
        LemmaId::ParabolicB,
        LemmaId::ParabolicI,
        LemmaId::EllipticB,
        LemmaId::EllipticI,
        LemmaId::FirstOrderB,
        LemmaId::FirstOrderI,
        LemmaId::ThirdOrderB,
        LemmaId::ThirdOrderI,
        LemmaId::MainB,
        LemmaId::MainI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LemmaId::ParabolicB => "parabolic-b",
            LemmaId::ParabolicI => "parabolic-i",
            LemmaId::EllipticB => "elliptic-b",
            LemmaId::EllipticI => "elliptic-i",
            LemmaId::FirstOrderB => "first-order-b",
            LemmaId::FirstOrderI => "first-order-i",
            LemmaId::ThirdOrderB => "third-order-b",
            LemmaId::ThirdOrderI => "third-order-i",
            LemmaId::MainB => "main-b",
            LemmaId::MainI => "main-i",
        }
    }

    pub fn parse(name: &str) -> Option<LemmaId> {
        LemmaId::ALL.into_iter().find(|l| l.name() == name)
    }

    pub fn distance_kind(self) -> DistanceKind {
        match self {
            LemmaId::ParabolicB | LemmaId::EllipticB | LemmaId::FirstOrderB | LemmaId::ThirdOrderB | LemmaId::MainB => {
                DistanceKind::Boundary
            }
            _ => DistanceKind::Interior,
        }
    }

    /// Whether the inequality is posed on the spatial interval at `t0` only.
    pub fn is_static(self) -> bool {
        matches!(
            self,
            LemmaId::EllipticB | LemmaId::EllipticI | LemmaId::FirstOrderB | LemmaId::FirstOrderI | LemmaId::ThirdOrderB | LemmaId::ThirdOrderI
        )
    }

    fn needs_transport(self) -> bool {
        matches!(self, LemmaId::FirstOrderB | LemmaId::FirstOrderI | LemmaId::ThirdOrderB | LemmaId::ThirdOrderI)
    }
}

impl std::fmt::Display for LemmaId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Test function of a scan, sampled on its own grid.
#[derive(Debug, Clone)]
pub enum TestField {
    SpaceTime(SpaceTime),
    /// Spatial samples; the grid only fixes the spacing and `T`.
    Static { grid: Grid, values: Vec<f64> },
}

impl TestField {
    pub fn grid(&self) -> Grid {
        match self {
            TestField::SpaceTime(f) => f.grid,
            TestField::Static { grid, .. } => *grid,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanInput {
    pub lemma: LemmaId,
    pub field: TestField,
    /// Transport field `p` of the first- and third-order inequalities.
    pub transport: Option<Vec<f64>>,
    /// Coefficients of `L`, sampled on the field's grid.
    pub coeffs: EllipticCoefficients,
    pub params: ModelParams,
    pub geometry: ObservationGeometry,
    /// Weight exponent `p` of the parabolic, elliptic and main inequalities.
    pub p: f64,
    pub descriptor: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RatioScanResult {
    pub lemma: LemmaId,
    pub lambda: f64,
    pub s_values: Vec<f64>,
    /// Both sides normalized by `exp(2 s psi_max)`.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `None` where the right-hand side vanishes.
    pub ratios: Vec<Option<f64>>,
    pub descriptor: String,
}

impl RatioScanResult {
    pub fn all_finite(&self) -> bool {
        self.lhs.iter().chain(&self.rhs).all(|v| v.is_finite())
            && self.ratios.iter().all(|r| r.is_some_and(f64::is_finite))
    }

    /// Ratio at the largest `s` divided by the median ratio over the upper
    /// half of the grid.
    pub fn tail_growth(&self) -> Option<f64> {
        let r: Vec<f64> = self.ratios.iter().copied().collect::<Option<Vec<_>>>()?;
        let n = r.len();
        if n < 2 {
            return None;
        }
        let mut upper = r[n / 2..].to_vec();
        upper.sort_by(f64::total_cmp);
        let m = upper.len();
        let median = if m % 2 == 1 { upper[m / 2] } else { 0.5 * (upper[m / 2 - 1] + upper[m / 2]) };
        if median == 0.0 {
            return Some(if r[n - 1] == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Some(r[n - 1] / median)
    }

    /// Ratio grows monotonically by more than ten times across the grid.
    pub fn red_flag(&self) -> bool {
        let Some(r) = self.ratios.iter().copied().collect::<Option<Vec<_>>>() else {
            return false;
        };
        r.windows(2).all(|w| w[1] >= w[0]) && r.len() > 1 && r[r.len() - 1] > 10.0 * r[0]
    }
}

/// Eight log-spaced values in `[1, 100]`.
pub fn default_s_grid() -> Vec<f64> {
    (0..8).map(|k| 10f64.powf(2.0 * k as f64 / 7.0)).collect()
}

pub const DEFAULT_LAMBDAS: [f64; 3] = [1.0, 2.0, 4.0];

enum Region {
    Volume,
    Boundary(usize),
    Observation,
}

struct Term {
    power: f64,
    region: Region,
    /// squared expression, level-major
    squared: Vec<f64>,
}

fn squared(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * x).collect()
}

fn sum_squares(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * x + y * y).collect()
}

/// Quadrature points `(d, l, w |E|^2)` of one term.
struct Points {
    power: f64,
    d: Vec<f64>,
    ell: Vec<f64>,
    mass: Vec<f64>,
}

struct Layout {
    xs: Vec<f64>,
    /// `(l(t), quadrature weight)` per level used
    levels: Vec<(f64, f64)>,
    wx: Vec<f64>,
    w_omega: Vec<f64>,
    n_space: usize,
}

impl Layout {
    fn new(field: &TestField, params: &ModelParams, geometry: &ObservationGeometry) -> Self {
        let grid = field.grid();
        let t_final = params.t_final;
        let levels = match field {
            TestField::Static { .. } => vec![(params.t0 * (t_final - params.t0), 1.0)],
            TestField::SpaceTime(_) => {
                let wt = trapezoid_weights(grid.n_time(), grid.dt);
                (1..grid.nt).map(|n| (grid.t(n) * (t_final - grid.t(n)), wt[n])).collect()
            }
        };
        let n = grid.n_space();
        Layout {
            xs: grid.xs(),
            levels,
            wx: trapezoid_weights(n, grid.dx),
            w_omega: trapezoid_weights_between(n, 0.0, grid.dx, geometry.omega.lo, geometry.omega.hi),
            n_space: n,
        }
    }

    fn level_offset(field: &TestField) -> usize {
        match field {
            TestField::Static { .. } => 0,
            TestField::SpaceTime(_) => 1,
        }
    }

    fn points(&self, term: &Term, d: &DistanceFunction, offset: usize) -> Points {
        let mut p = Points { power: term.power, d: Vec::new(), ell: Vec::new(), mass: Vec::new() };
        for (k, &(ell, wt)) in self.levels.iter().enumerate() {
            let row = &term.squared[(k + offset) * self.n_space..(k + offset + 1) * self.n_space];
            let mut push = |i: usize, w: f64| {
                let m = wt * w * row[i];
                if m != 0.0 {
                    p.d.push(d.value(self.xs[i]));
                    p.ell.push(ell);
                    p.mass.push(m);
                }
            };
            match term.region {
                Region::Volume => (0..self.n_space).for_each(|i| push(i, self.wx[i])),
                Region::Observation => (0..self.n_space).for_each(|i| push(i, self.w_omega[i])),
                Region::Boundary(i) => push(i, 1.0),
            }
        }
        p
    }
}

fn evaluate(points: &[Points], d_norm: f64, lambda: f64, s: f64, psi_ref: f64) -> f64 {
    let mut total = 0.0;
    for p in points {
        for k in 0..p.mass.len() {
            let (phi, psi) = weights_from_distance(p.d[k], d_norm, lambda, p.ell[k]);
            let log = p.power * (s * phi).ln() + 2.0 * s * (psi - psi_ref);
            if log >= LOG_FLUSH {
                total += p.mass[k] * log.exp();
            }
        }
    }
    total
}

fn require_zero(values: impl IntoIterator<Item = f64>, scale: f64, what: &str) -> Result<()> {
    let worst = values.into_iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if worst > 1e-4 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!("{what} (max violation {worst:.3e})")));
    }
    Ok(())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn endpoint_values(v: &[f64]) -> [f64; 2] {
    [v[0], v[v.len() - 1]]
}

fn omega_nodes<'a>(xs: &'a [f64], geometry: &'a ObservationGeometry) -> impl Iterator<Item = usize> + 'a {
    xs.iter().enumerate().filter(|(_, &x)| geometry.omega.contains_closed(x)).map(|(i, _)| i)
}

fn gamma_index(geometry: &ObservationGeometry, n: usize) -> usize {
    match geometry.gamma {
        Side::Left => 0,
        Side::Right => n - 1,
    }
}

fn check_transport(input: &ScanInput, d: &DistanceFunction, xs: &[f64]) -> Result<Vec<f64>> {
    let p = input
        .transport
        .clone()
        .ok_or_else(|| Error::Precondition(format!("{} needs a transport field p", input.lemma)))?;
    if p.len() != xs.len() {
        return Err(Error::Data(format!("transport field has {} samples, expected {}", p.len(), xs.len())));
    }
    let interior = d.kind == DistanceKind::Interior;
    let m = xs
        .iter()
        .zip(&p)
        .filter(|(&x, _)| !(interior && input.geometry.omega.contains(x)))
        .map(|(&x, &pv)| (pv * d.derivative(x)).abs())
        .fold(f64::INFINITY, f64::min);
    if !(m > 1e-12) {
        return Err(Error::Precondition(format!("transport field violates |p d'| >= m > 0 (min {m:.3e})")));
    }
    Ok(p)
}

fn static_terms(input: &ScanInput, values: &[f64], grid: &Grid, d: &DistanceFunction) -> Result<(Vec<Term>, Vec<Term>)> {
    let n = grid.n_space();
    let ops: Vec<Differentiator> =
        (0..=4).map(|k| Differentiator::new(n, grid.dx, k, ACCURACY)).collect::<Result<_>>()?;
    let dv: Vec<Vec<f64>> = ops.iter().map(|o| o.apply_flushed(values)).collect();
    let scales: Vec<f64> = dv.iter().map(|v| max_abs(v)).collect();
    let xs = grid.xs();
    let interior = d.kind == DistanceKind::Interior;
    let g = gamma_index(&input.geometry, n);
    let p = input.p;
    let vol = |power: f64, squared: Vec<f64>| Term { power, region: Region::Volume, squared };

    match input.lemma {
        LemmaId::EllipticB | LemmaId::EllipticI => {
            require_zero(endpoint_values(values), scales[0], "v must vanish at both endpoints")?;
            let l = EllipticOperator::new(&input.coeffs, grid.dx, ACCURACY)?.apply(values);
            let lhs = vec![vol(p - 1.0, squared(&dv[2])), vol(p + 1.0, squared(&dv[1])), vol(p + 3.0, squared(&dv[0]))];
            let mut rhs = vec![vol(p, squared(&l))];
            if interior {
                rhs.push(Term { power: p + 3.0, region: Region::Observation, squared: squared(&dv[0]) });
            } else {
                rhs.push(Term { power: p + 1.0, region: Region::Boundary(g), squared: squared(&dv[1]) });
            }
            Ok((lhs, rhs))
        }
        LemmaId::FirstOrderB | LemmaId::FirstOrderI => {
            for k in 0..2 {
                require_zero(endpoint_values(&dv[k]), scales[k], &format!("derivative {k} of v must vanish at both endpoints"))?;
            }
            if interior {
                require_zero(omega_nodes(&xs, &input.geometry).map(|i| values[i]), scales[0], "v must vanish in omega")?;
            }
            let pf = check_transport(input, d, &xs)?;
            let pv: Vec<f64> = pf.iter().zip(&dv[1]).map(|(a, b)| a * b).collect();
            let dpv = ops[1].apply_flushed(&pv);
            let lhs = vec![vol(2.0, sum_squares(&dv[1], &dv[0]))];
            let rhs = vec![vol(0.0, sum_squares(&dpv, &pv))];
            Ok((lhs, rhs))
        }
        LemmaId::ThirdOrderB | LemmaId::ThirdOrderI => {
            for k in 0..4 {
                require_zero(endpoint_values(&dv[k]), scales[k], &format!("derivative {k} of v must vanish at both endpoints"))?;
            }
            if interior {
                require_zero(omega_nodes(&xs, &input.geometry).map(|i| values[i]), scales[0], "v must vanish in omega")?;
            } else {
                require_zero([dv[2][g]], scales[2], "second derivative of v must vanish on gamma")?;
            }
            let pf = check_transport(input, d, &xs)?;
            let pv: Vec<f64> = pf.iter().zip(&dv[3]).map(|(a, b)| a * b).collect();
            let dpv = ops[1].apply_flushed(&pv);
            let lhs = vec![
                vol(1.0, squared(&dv[3])),
                vol(2.0, squared(&dv[3])),
                vol(3.0, squared(&dv[2])),
                vol(5.0, sum_squares(&dv[1], &dv[0])),
            ];
            let rhs = vec![vol(0.0, sum_squares(&dpv, &pv))];
            Ok((lhs, rhs))
        }
        _ => Err(Error::Precondition(format!("{} needs a space-time test field", input.lemma))),
    }
}

struct Derivs {
    space: Vec<Differentiator>,
    time: Vec<Differentiator>,
}

impl Derivs {
    fn dx(&self, f: &SpaceTime, k: usize) -> SpaceTime {
        f.map_levels(|_, row| self.space[k].apply_flushed(row))
    }

    fn dt(&self, f: &SpaceTime, k: usize) -> SpaceTime {
        f.map_series(|_, s| self.time[k].apply_flushed(s))
    }
}

fn dynamic_terms(input: &ScanInput, v: &SpaceTime, d: &DistanceFunction) -> Result<(Vec<Term>, Vec<Term>)> {
    let grid = v.grid;
    let n = grid.n_space();
    let ops = Derivs {
        space: (0..=3).map(|k| Differentiator::new(n, grid.dx, k, ACCURACY)).collect::<Result<_>>()?,
        time: (0..=2).map(|k| Differentiator::new(grid.n_time(), grid.dt, k, ACCURACY)).collect::<Result<_>>()?,
    };
    let lop = EllipticOperator::new(&input.coeffs, grid.dx, ACCURACY)?;
    let apply_l = |f: &SpaceTime| f.map_levels(|_, row| lop.apply(row));
    let interior = d.kind == DistanceKind::Interior;
    let g = gamma_index(&input.geometry, n);
    let xs = grid.xs();
    let (rho1, rho2, p) = (input.params.rho1, input.params.rho2, input.p);
    let vol = |power: f64, squared: Vec<f64>| Term { power, region: Region::Volume, squared };
    let scale = v.max_abs();

    let mut ends = Vec::new();
    for k in 0..grid.n_time() {
        ends.extend(endpoint_values(v.level(k)));
    }
    require_zero(ends, scale, "v must vanish at both endpoints")?;

    let vt = ops.dt(v, 1);
    let vx = ops.dx(v, 1);
    let vxx = ops.dx(v, 2);
    let lv = apply_l(v);

    match input.lemma {
        LemmaId::ParabolicB | LemmaId::ParabolicI => {
            let mut pv = vt.scaled(rho1);
            pv.axpy(-1.0, &lv);
            let lhs = vec![
                vol(p - 1.0, sum_squares(&vt.values, &vxx.values)),
                vol(p + 1.0, squared(&vx.values)),
                vol(p + 3.0, squared(&v.values)),
            ];
            let mut rhs = vec![vol(p, squared(&pv.values))];
            if interior {
                rhs.push(Term { power: p + 3.0, region: Region::Observation, squared: squared(&v.values) });
            } else {
                rhs.push(Term { power: p + 1.0, region: Region::Boundary(g), squared: squared(&vx.values) });
            }
            Ok((lhs, rhs))
        }
        LemmaId::MainB | LemmaId::MainI => {
            require_zero(v.level(0).iter().copied(), scale, "u must vanish at t = 0")?;
            let mut half = SpaceTime::zeros(grid);
            for i in 0..n {
                half.set_node_series(i, &caputo(&v.node_series(i), 0.5, grid.dt)?);
            }
            // source g of the half-order equation satisfied by u
            let mut src = vt.scaled(rho1);
            src.axpy(rho2, &half);
            src.axpy(-1.0, &lv);
            let src_scale = src.max_abs().max(scale);
            let mut src_ends = Vec::new();
            for k in 1..grid.n_time() {
                src_ends.extend(endpoint_values(src.level(k)));
            }
            require_zero(src_ends, src_scale, "g must vanish on the boundary")?;
            if interior {
                let inside: Vec<usize> = omega_nodes(&xs, &input.geometry).collect();
                require_zero((1..grid.n_time()).flat_map(|k| inside.iter().map(move |&i| (k, i))).map(|(k, i)| src.at(i, k)), src_scale, "g must vanish in omega")?;
            } else {
                let gx = ops.dx(&src, 1);
                require_zero((1..grid.n_time()).map(|k| gx.at(g, k)), max_abs(&gx.values), "grad g must vanish on gamma")?;
            }

            let vtt = ops.dt(v, 2);
            let vtx = ops.dx(&vt, 1);
            let vtxx = ops.dx(&vt, 2);
            let mut first = vt.scaled(rho1);
            first.axpy(-1.0, &lv);
            let first_x = ops.dx(&first, 1);
            // rho2^2 u_t - (rho1 d_t - L)^2 u
            let lfirst = apply_l(&first);
            let first_t = ops.dt(&first, 1);
            let mut op = vt.scaled(rho2 * rho2);
            op.axpy(-rho1, &first_t);
            op.axpy(1.0, &lfirst);

            let lhs = vec![
                vol(p - 1.0, sum_squares(&vtt.values, &vtxx.values)),
                vol(p + 1.0, squared(&vtx.values)),
                vol(p + 2.0, squared(&first_x.values)),
                vol(p + 3.0, sum_squares(&vt.values, &vxx.values)),
                vol(p + 5.0, squared(&vx.values)),
                vol(p + 7.0, squared(&v.values)),
            ];
            let mut rhs = vec![vol(p + 1.0, squared(&op.values))];
            if interior {
                let obs = |power: f64, f: &SpaceTime| Term { power, region: Region::Observation, squared: squared(&f.values) };
                rhs.push(obs(p + 3.0, &vt));
                rhs.push(obs(p + 4.0, &half));
                rhs.push(obs(p + 7.0, v));
            } else {
                let half_x = ops.dx(&half, 1);
                let bnd = |power: f64, f: &SpaceTime| Term { power, region: Region::Boundary(g), squared: squared(&f.values) };
                rhs.push(bnd(p + 1.0, &vtx));
                rhs.push(bnd(p + 2.0, &half_x));
                rhs.push(bnd(p + 5.0, &vx));
            }
            Ok((lhs, rhs))
        }
        _ => Err(Error::Precondition(format!("{} needs a static test field", input.lemma))),
    }
}

/// Evaluates both sides of the named inequality for every `s`.
pub fn carleman_scan(input: &ScanInput, lambda: f64, s_values: &[f64]) -> Result<RatioScanResult> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if s_values.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain("s values must be positive".into()));
    }
    input.params.validate()?;
    let grid = input.field.grid();
    input.coeffs.check_shape(grid.n_space())?;
    if (grid.t_final - input.params.t_final).abs() > 1e-12 * input.params.t_final {
        return Err(Error::Data("test field grid and parameters disagree on T".into()));
    }
    let d = match input.lemma.distance_kind() {
        DistanceKind::Boundary => build_d1(&input.geometry, &grid),
        DistanceKind::Interior => build_d2(&input.geometry, &grid)?,
    };
    let (lhs_terms, rhs_terms) = match (&input.field, input.lemma.is_static()) {
        (TestField::Static { values, grid }, true) => {
            if values.len() != grid.n_space() {
                return Err(Error::Data("static test field does not match its grid".into()));
            }
            static_terms(input, values, grid, &d)?
        }
        (TestField::SpaceTime(v), false) => dynamic_terms(input, v, &d)?,
        (_, true) => return Err(Error::Precondition(format!("{} needs a static test field", input.lemma))),
        (_, false) => return Err(Error::Precondition(format!("{} needs a space-time test field", input.lemma))),
    };
    if !input.lemma.needs_transport() && input.transport.is_some() {
        return Err(Error::Precondition(format!("{} takes no transport field", input.lemma)));
    }

    let layout = Layout::new(&input.field, &input.params, &input.geometry);
    let offset = Layout::level_offset(&input.field);
    let lhs_pts: Vec<Points> = lhs_terms.iter().map(|t| layout.points(t, &d, offset)).collect();
    let rhs_pts: Vec<Points> = rhs_terms.iter().map(|t| layout.points(t, &d, offset)).collect();
    let ell_max = layout.levels.iter().fold(0.0_f64, |m, l| m.max(l.0));
    let norm = d.sup_norm();
    let psi_ref = ((lambda * norm).exp() - (2.0 * lambda * norm).exp()) / ell_max;

    let (lhs, rhs): (Vec<f64>, Vec<f64>) = s_values
        .par_iter()
        .map(|&s| (evaluate(&lhs_pts, norm, lambda, s, psi_ref), evaluate(&rhs_pts, norm, lambda, s, psi_ref)))
        .unzip();
    let ratios = lhs.iter().zip(&rhs).map(|(l, r)| if *r > 0.0 { Some(l / r) } else { None }).collect();
    Ok(RatioScanResult {
        lemma: input.lemma,
        lambda,
        s_values: s_values.to_vec(),
        lhs,
        rhs,
        ratios,
        descriptor: input.descriptor.clone(),
    })
}

/// Grid sizes of the default test functions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanResolution {
    /// Interior nodes for the spatial inequalities.
    pub nx_static: usize,
    pub nx_dynamic: usize,
    pub nt_dynamic: usize,
    /// Vanishing order of the test functions at the edges of omega.
    pub cutoff_order: i32,
}

impl Default for ScanResolution {
    fn default() -> Self {
        Self { nx_static: 4095, nx_dynamic: 1023, nt_dynamic: 128, cutoff_order: 8 }
    }
}

fn omega_cutoff(x: f64, geometry: &ObservationGeometry, k: i32) -> f64 {
    let w = geometry.omega;
    let dist = (w.lo - x).max(x - w.hi).max(0.0);
    dist.powi(k)
}

/// `x^a (1 - x)^b`, mirrored when `gamma` is the left endpoint so that the
/// higher vanishing order sits on `gamma`.
fn endpoint_poly(x: f64, a: i32, b: i32, gamma: Side) -> f64 {
    match gamma {
        Side::Right => x.powi(a) * (1.0 - x).powi(b),
        Side::Left => x.powi(b) * (1.0 - x).powi(a),
    }
}

/// Builds the standard test function of `lemma` on a grid of the given
/// resolution, with coefficients of `L` produced by `coeffs`.
pub fn default_scan(
    lemma: LemmaId,
    params: &ModelParams,
    geometry: &ObservationGeometry,
    coeffs: &dyn Fn(&Grid) -> Result<EllipticCoefficients>,
    resolution: &ScanResolution,
) -> Result<ScanInput> {
    let t_final = params.t_final;
    let k = resolution.cutoff_order;
    let gamma = geometry.gamma;
    let geo = *geometry;
    let static_field = |f: &dyn Fn(f64) -> f64| -> Result<(TestField, Grid)> {
        let grid = Grid::new(resolution.nx_static, crate::model::MIN_NODES, t_final)?;
        let values = grid.xs().iter().map(|&x| f(x)).collect();
        Ok((TestField::Static { grid, values }, grid))
    };
    let dynamic_field = |f: &dyn Fn(f64, f64) -> f64| -> Result<(TestField, Grid)> {
        let grid = Grid::new(resolution.nx_dynamic, resolution.nt_dynamic, t_final)?;
        Ok((TestField::SpaceTime(SpaceTime::from_fn(grid, f)), grid))
    };
    let d1_slope = build_d1(geometry, &Grid::new(16, 16, t_final)?).derivative(0.5);

    let (field, grid, transport, descriptor): (TestField, Grid, Option<fn(f64, f64) -> f64>, String) = match lemma {
        LemmaId::ParabolicB | LemmaId::ParabolicI => {
            let (f, g) = dynamic_field(&|x, t| t * (t_final - t) * x * (std::f64::consts::PI * x).sin())?;
            (f, g, None, "l(t) x sin(pi x)".into())
        }
        LemmaId::EllipticB | LemmaId::EllipticI => {
            let (f, g) = static_field(&|x| x * (std::f64::consts::PI * x).sin())?;
            (f, g, None, "x sin(pi x)".into())
        }
        LemmaId::FirstOrderB => {
            let (f, g) = static_field(&|x| x * x * (1.0 - x) * (1.0 - x))?;
            (f, g, Some(|slope, _| slope), "x^2 (1-x)^2, p = d1'".into())
        }
        LemmaId::FirstOrderI => {
            let (f, g) = static_field(&|x| x * x * (1.0 - x) * (1.0 - x) * omega_cutoff(x, &geo, k))?;
            (f, g, Some(|_, x| 1.0 - 2.0 * x), format!("x^2 (1-x)^2 dist(x, omega)^{k}, p = d2'"))
        }
        LemmaId::ThirdOrderB => {
            let (f, g) = static_field(&|x| x.powi(4) * (1.0 - x).powi(4))?;
            (f, g, Some(|slope, _| slope), "x^4 (1-x)^4, p = d1'".into())
        }
        LemmaId::ThirdOrderI => {
            let (f, g) = static_field(&|x| x.powi(4) * (1.0 - x).powi(4) * omega_cutoff(x, &geo, k))?;
            (f, g, Some(|_, x| 1.0 - 2.0 * x), format!("x^4 (1-x)^4 dist(x, omega)^{k}, p = d2'"))
        }
        LemmaId::MainB => {
            let (f, g) = dynamic_field(&|x, t| t * t * endpoint_poly(x, 3, 4, gamma))?;
            (f, g, None, "t^2 x^3 (1-x)^4 (higher order on gamma)".into())
        }
        LemmaId::MainI => {
            let (f, g) = dynamic_field(&|x, t| t * t * x.powi(3) * (1.0 - x).powi(3) * omega_cutoff(x, &geo, k))?;
            (f, g, None, format!("t^2 x^3 (1-x)^3 dist(x, omega)^{k}"))
        }
    };
    let transport = transport.map(|p| grid.xs().iter().map(|&x| p(d1_slope, x)).collect());
    Ok(ScanInput {
        lemma,
        field,
        transport,
        coeffs: coeffs(&grid)?,
        params: *params,
        geometry: *geometry,
        p: 0.0,
        descriptor,
    })
}

/// Scans every lemma for every `lambda` with the default test functions.
pub fn scan_all(
    lemmas: &[LemmaId],
    lambdas: &[f64],
    s_values: &[f64],
    params: &ModelParams,
    geometry: &ObservationGeometry,
    coeffs: &(dyn Fn(&Grid) -> Result<EllipticCoefficients> + Sync),
    resolution: &ScanResolution,
) -> Result<Vec<RatioScanResult>> {
    let inputs: Vec<ScanInput> =
        lemmas.iter().map(|&l| default_scan(l, params, geometry, coeffs, resolution)).collect::<Result<_>>()?;
    let cells: Vec<(usize, f64)> = (0..inputs.len()).flat_map(|i| lambdas.iter().map(move |&l| (i, l))).collect();
    cells.par_iter().map(|&(i, lambda)| carleman_scan(&inputs[i], lambda, s_values)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ModelParams, ObservationGeometry) {
        (ModelParams::with_default_window(1.0, 1.0, 1.0).unwrap(), ObservationGeometry::default())
    }

    fn laplacian(grid: &Grid) -> Result<EllipticCoefficients> {
        Ok(EllipticCoefficients::laplacian(grid))
    }

    fn small() -> ScanResolution {
        ScanResolution { nx_static: 255, nx_dynamic: 63, nt_dynamic: 32, cutoff_order: 6 }
    }

    #[test]
    fn s_grid_is_log_spaced() {
        let s = default_s_grid();
        assert_eq!(s.len(), 8);
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[7] - 100.0).abs() < 1e-9);
        assert!((s[2] / s[1] - s[1] / s[0]).abs() < 1e-9);
    }

    #[test]
    fn lemma_names_round_trip() {
        for l in LemmaId::ALL {
            assert_eq!(LemmaId::parse(l.name()), Some(l));
        }
        assert_eq!(LemmaId::parse("hyperbolic"), None);
    }

    #[test]
    fn zero_field_gives_undefined_ratios() {
        let (params, geo) = setup();
        let mut input = default_scan(LemmaId::ParabolicB, &params, &geo, &laplacian, &small()).unwrap();
        if let TestField::SpaceTime(f) = &mut input.field {
            f.values.iter_mut().for_each(|v| *v = 0.0);
        }
        let r = carleman_scan(&input, 2.0, &[1.0, 10.0]).unwrap();
        assert!(r.lhs.iter().chain(&r.rhs).all(|&v| v == 0.0));
        assert!(r.ratios.iter().all(Option::is_none));
    }

    #[test]
    fn parabolic_boundary_ratio_bounded() {
        let (params, geo) = setup();
        let input = default_scan(
            LemmaId::ParabolicB,
            &params,
            &geo,
            &laplacian,
            &ScanResolution { nx_dynamic: 255, nt_dynamic: 128, ..small() },
        )
        .unwrap();
        let s = [5.0, 10.0, 20.0, 40.0, 80.0];
        let r = carleman_scan(&input, 2.0, &s).unwrap();
        assert!(r.all_finite());
        let ratios: Vec<f64> = r.ratios.iter().map(|v| v.unwrap()).collect();
        let max_upper = ratios[2..].iter().cloned().fold(0.0, f64::max);
        assert!(max_upper <= 2.0 * ratios[2], "{ratios:?}");
    }

    #[test]
    fn first_order_boundary_ratio_bounded() {
        let (params, geo) = setup();
        let input = default_scan(LemmaId::FirstOrderB, &params, &geo, &laplacian, &small()).unwrap();
        let r = carleman_scan(&input, 2.0, &default_s_grid()).unwrap();
        assert!(r.all_finite());
        assert!(!r.red_flag());
        assert!(r.tail_growth().unwrap() <= 3.0, "{:?}", r.ratios);
    }

    #[test]
    fn boundary_condition_violation_is_reported() {
        let (params, geo) = setup();
        let mut input = default_scan(LemmaId::ThirdOrderB, &params, &geo, &laplacian, &small()).unwrap();
        if let TestField::Static { grid, values } = &mut input.field {
            *values = grid.xs().iter().map(|&x| x * x * (1.0 - x) * (1.0 - x)).collect();
        }
        let e = carleman_scan(&input, 1.0, &[1.0]).unwrap_err();
        match e {
            Error::Precondition(msg) => assert!(msg.contains("derivative 2"), "{msg}"),
            other => panic!("{other:?}"),
        }

        let mut input = default_scan(LemmaId::ParabolicI, &params, &geo, &laplacian, &small()).unwrap();
        if let TestField::SpaceTime(f) = &mut input.field {
            *f = SpaceTime::from_fn(f.grid, |x, t| t * (1.0 + x));
        }
        assert!(matches!(carleman_scan(&input, 1.0, &[1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn transport_bound_is_checked() {
        let (params, geo) = setup();
        let mut input = default_scan(LemmaId::FirstOrderI, &params, &geo, &laplacian, &small()).unwrap();
        input.transport = Some(vec![0.0; input.field.grid().n_space()]);
        assert!(matches!(carleman_scan(&input, 1.0, &[1.0]), Err(Error::Precondition(_))));
    }

    #[test]
    fn red_flag_and_tail_growth() {
        let mut r = RatioScanResult {
            lemma: LemmaId::MainI,
            lambda: 1.0,
            s_values: vec![1.0, 2.0, 3.0, 4.0],
            lhs: vec![1.0; 4],
            rhs: vec![1.0; 4],
            ratios: vec![Some(1.0), Some(5.0), Some(20.0), Some(40.0)],
            descriptor: String::new(),
        };
        assert!(r.red_flag());
        assert!((r.tail_growth().unwrap() - 40.0 / 30.0).abs() < 1e-12);
        r.ratios = vec![Some(3.0), Some(1.0), Some(2.0), Some(2.0)];
        assert!(!r.red_flag());
    }
}
