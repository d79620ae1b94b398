//! Regularized reconstruction of the source factor, the potential
//! difference and the linearized diffusion difference from boundary or
//! interior observations.

pub mod basis;
pub mod coefficient;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{solve_forward, ForwardProblem};
use crate::model::{EllipticCoefficients, Grid, ModelParams, ObservationGeometry, Side, SpaceTime};
use crate::quadrature::trapezoid;
use crate::stencil::Differentiator;

pub use basis::{diffusion_basis, source_basis, Basis, DEFAULT_BASIS_SIZE};
pub use coefficient::{
    invert_diffusion_coefficient, invert_zeroth_coefficient, solve_lifted, transversality, Transversality,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationKind {
    /// Flux at the observed endpoint over the time window.
    Boundary,
    /// Values at the nodes of `omega` over the time window.
    Interior,
}

impl ObservationKind {
    pub const ALL: [ObservationKind; 2] = [ObservationKind::Boundary, ObservationKind::Interior];

    pub fn name(self) -> &'static str {
        match self {
            ObservationKind::Boundary => "boundary",
            ObservationKind::Interior => "interior",
        }
    }
}

/// Snapshot `u(., t0)` plus time series over the window levels.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObservationSet {
    pub kind: ObservationKind,
    pub snapshot: Vec<f64>,
    /// `series[j][n]`: observation `j` at `times[n]`.
    pub series: Vec<Vec<f64>>,
    /// Grid nodes the series are attached to.
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
    pub noise_level: f64,
}

/// Time levels whose times lie in the closed window `[t0 - delta, t0 + delta]`.
pub fn window_levels(grid: &Grid, params: &ModelParams) -> Vec<usize> {
    let (lo, hi) = params.window();
    let tol = 1e-9 * grid.dt;
    (0..grid.n_time()).filter(|&n| grid.t(n) >= lo - tol && grid.t(n) <= hi + tol).collect()
}

/// Nodes carrying the series: the observed endpoint, or the nodes in `omega`.
pub fn observation_nodes(grid: &Grid, kind: ObservationKind, geometry: &ObservationGeometry) -> Vec<usize> {
    match kind {
        ObservationKind::Boundary => match geometry.gamma {
            Side::Left => vec![0],
            Side::Right => vec![grid.nx + 1],
        },
        ObservationKind::Interior => (0..grid.n_space()).filter(|&i| geometry.omega.contains(grid.x(i))).collect(),
    }
}

impl ObservationSet {
    /// Samples the observation pattern of `kind` from a space-time field.
    pub fn observe(
        field: &SpaceTime,
        params: &ModelParams,
        kind: ObservationKind,
        geometry: &ObservationGeometry,
    ) -> Result<Self> {
        let grid = field.grid;
        let levels = window_levels(&grid, params);
        if levels.len() < 2 {
            return Err(Error::Sizing("observation window holds fewer than two time levels".into()));
        }
        let nodes = observation_nodes(&grid, kind, geometry);
        if nodes.is_empty() {
            return Err(Error::Sizing("no grid node lies in omega".into()));
        }
        let snapshot = field.level(grid.nearest_level(params.t0)).to_vec();
        let series = match kind {
            ObservationKind::Boundary => {
                let d = Differentiator::second_order(grid.n_space(), grid.dx, 1)?;
                vec![levels.iter().map(|&n| d.at(field.level(n), nodes[0])).collect()]
            }
            ObservationKind::Interior => {
                nodes.iter().map(|&i| levels.iter().map(|&n| field.at(i, n)).collect()).collect()
            }
        };
        Ok(Self {
            kind,
            snapshot,
            series,
            nodes,
            times: levels.iter().map(|&n| grid.t(n)).collect(),
            noise_level: 0.0,
        })
    }

    pub fn validate(&self, grid: &Grid, geometry: &ObservationGeometry) -> Result<()> {
        if self.snapshot.len() != grid.n_space() {
            return Err(Error::Data(format!(
                "snapshot has {} samples, expected {}",
                self.snapshot.len(),
                grid.n_space()
            )));
        }
        if self.nodes != observation_nodes(grid, self.kind, geometry) {
            return Err(Error::Data(format!("series nodes do not match the {} pattern", self.kind.name())));
        }
        if self.series.len() != self.nodes.len() || self.series.iter().any(|s| s.len() != self.times.len()) {
            return Err(Error::Data("series shape does not match nodes and times".into()));
        }
        if !(self.noise_level >= 0.0) {
            return Err(Error::Domain(format!("noise level must be nonnegative, got {}", self.noise_level)));
        }
        if self.stacked().iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("observations contain non-finite values".into()));
        }
        Ok(())
    }

    /// Snapshot followed by the flattened series.
    pub fn stacked(&self) -> Vec<f64> {
        let mut out = self.snapshot.clone();
        for s in &self.series {
            out.extend_from_slice(s);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.snapshot.len() + self.series.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same layout, new stacked values.
    pub fn with_stacked(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::Data(format!("expected {} stacked values, got {}", self.len(), values.len())));
        }
        let mut out = self.clone();
        let m = self.snapshot.len();
        out.snapshot.copy_from_slice(&values[..m]);
        let mut at = m;
        for s in &mut out.series {
            let k = s.len();
            s.copy_from_slice(&values[at..at + k]);
            at += k;
        }
        Ok(out)
    }

    /// Copy with seeded Gaussian noise of relative level `level`.
    pub fn with_noise(&self, level: f64, seed: u64) -> Result<Self> {
        let noisy = add_noise(&self.stacked(), level, seed)?;
        let mut out = self.with_stacked(&noisy)?;
        out.noise_level = level;
        Ok(out)
    }

    /// Componentwise `self - other` on matching layouts.
    pub fn difference(&self, other: &ObservationSet) -> Result<Self> {
        if self.kind != other.kind || self.nodes != other.nodes || self.times != other.times {
            return Err(Error::Data("observation layouts differ".into()));
        }
        let a = self.stacked();
        let b = other.stacked();
        if a.len() != b.len() {
            return Err(Error::Data("observation layouts differ".into()));
        }
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mut out = self.with_stacked(&d)?;
        out.noise_level = self.noise_level.max(other.noise_level);
        Ok(out)
    }
}

/// Zero-mean Gaussian perturbation with standard deviation
/// `level * max |data|`, reproducible for a given seed.
pub fn add_noise(data: &[f64], level: f64, seed: u64) -> Result<Vec<f64>> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::Domain(format!("noise level must be nonnegative, got {level}")));
    }
    if level == 0.0 {
        return Ok(data.to_vec());
    }
    let scale = level * data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(data.to_vec());
    }
    let normal = Normal::new(0.0, scale).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(data.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// Linear map from basis coefficients to stacked observations.
#[derive(Debug, Clone)]
pub struct ForwardMap {
    pub matrix: DMatrix<f64>,
    pub basis: Basis,
    pub kind: ObservationKind,
    /// Observation layout of the columns (values of the first column).
    pub layout: ObservationSet,
}

impl ForwardMap {
    pub fn predict(&self, coefficients: &[f64]) -> Vec<f64> {
        (&self.matrix * DVector::from_column_slice(coefficients)).iter().copied().collect()
    }
}

/// Builds one column per basis function by solving the forward problem
/// with the source produced by `source_of` and observing the solution.
pub(crate) fn assemble_columns(
    basis: &Basis,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    kind: ObservationKind,
    geometry: &ObservationGeometry,
    source_of: impl Fn(&[f64]) -> Result<SpaceTime> + Sync,
) -> Result<ForwardMap> {
    if basis.is_empty() {
        return Err(Error::Sizing("empty basis".into()));
    }
    let grid = basis.grid;
    let observed: Vec<ObservationSet> = basis
        .functions
        .par_iter()
        .map(|psi| {
            let source = source_of(psi)?;
            let problem = ForwardProblem::new(*params, coeffs.clone(), grid, source);
            let u = solve_forward(&problem)?;
            ObservationSet::observe(u.samples(), params, kind, geometry)
        })
        .collect::<Result<_>>()?;
    let rows = observed[0].len();
    let cols: Vec<Vec<f64>> = observed.iter().map(ObservationSet::stacked).collect();
    let matrix = DMatrix::from_fn(rows, cols.len(), |i, k| cols[k][i]);
    Ok(ForwardMap { matrix, basis: basis.clone(), kind, layout: observed[0].clone() })
}

/// Map for sources `g = f(x) R(x, t)`: column `k` observes the solution
/// driven by `psi_k R`.
pub fn assemble_forward_map(
    r: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    kind: ObservationKind,
    geometry: &ObservationGeometry,
    basis: &Basis,
) -> Result<ForwardMap> {
    let grid = r.grid;
    if basis.grid != grid {
        return Err(Error::Data("basis grid differs from the grid of R".into()));
    }
    let n0 = grid.nearest_level(params.t0);
    let level = r.level(n0);
    let (node, min) = level
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.abs()))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    if !(min > 0.0) {
        return Err(Error::Assumption(format!(
            "|R(x, t0)| must be positive at every node, but R({:.4}, {:.4}) = {:.3e}",
            grid.x(node),
            grid.t(n0),
            level[node]
        )));
    }
    assemble_columns(basis, params, coeffs, kind, geometry, |psi| {
        let mut g = r.clone();
        for n in 0..grid.n_time() {
            for (v, p) in g.level_mut(n).iter_mut().zip(psi) {
                *v *= p;
            }
        }
        Ok(g)
    })
}

/// Regularization weight selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaRule {
    Fixed(f64),
    /// Largest `alpha` on a logarithmic grid whose misfit does not exceed
    /// `tau * sigma * sqrt(m)`, with `sigma = noise_level * max |data|`.
    Discrepancy {
        #[serde(default = "default_tau")]
        tau: f64,
    },
}

pub const DEFAULT_TAU: f64 = 1.1;

fn default_tau() -> f64 {
    DEFAULT_TAU
}

impl Default for AlphaRule {
    fn default() -> Self {
        AlphaRule::Fixed(1e-8)
    }
}

/// Outcome of a Tikhonov reconstruction.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InversionResult {
    pub estimate: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub alpha: f64,
    /// `|A c - data|_2`.
    pub residual: f64,
    pub rel_error: Option<f64>,
    /// Condition estimate of the regularized normal matrix.
    pub condition: f64,
}

impl InversionResult {
    /// Fills `rel_error` with the relative discrete `L^2` distance to `truth`.
    pub fn with_truth(mut self, truth: &[f64], dx: f64) -> Result<Self> {
        self.rel_error = Some(relative_l2_error(&self.estimate, truth, dx)?);
        Ok(self)
    }
}

pub fn relative_l2_error(estimate: &[f64], truth: &[f64], dx: f64) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Data("estimate and truth lengths differ".into()));
    }
    let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).collect();
    let sq: Vec<f64> = truth.iter().map(|v| v * v).collect();
    let den = trapezoid(&sq, dx).sqrt();
    if den == 0.0 {
        return Err(Error::Domain("relative error undefined for a zero truth".into()));
    }
    Ok(trapezoid(&diff, dx).sqrt() / den)
}

/// Beyond this the normal matrix is treated as numerically singular.
pub const MAX_CONDITION: f64 = 1e14;

struct Solved {
    coefficients: Vec<f64>,
    residual: f64,
    condition: f64,
}

fn solve_tikhonov(ata: &DMatrix<f64>, wtw: &DMatrix<f64>, atd: &DVector<f64>, a: &DMatrix<f64>, d: &DVector<f64>, alpha: f64) -> Result<Solved> {
    let normal = ata + wtw * alpha;
    let eig = normal.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &v| (l.min(v), h.max(v.abs())));
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let chol = normal.cholesky().ok_or(Error::IllConditioned { condition })?;
    let c = chol.solve(atd);
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned { condition });
    }
    let residual = (a * &c - d).norm();
    Ok(Solved { coefficients: c.iter().copied().collect(), residual, condition })
}

/// Exponents `e` of the candidate weights `10^(e/4)` for the discrepancy rule.
const ALPHA_EXPONENTS: std::ops::RangeInclusive<i32> = -56..=8;

/// Minimizes `|A c - d|^2 + alpha |W c|^2` with `W` the difference penalty
/// of the basis and returns `sum_k c_k psi_k`, zeroed wherever every basis
/// function vanishes.
pub fn invert_source(obs: &ObservationSet, map: &ForwardMap, rule: AlphaRule) -> Result<InversionResult> {
    if obs.kind != map.kind {
        return Err(Error::Data("observation kind differs from the map".into()));
    }
    let data = obs.stacked();
    if data.len() != map.matrix.nrows() || obs.nodes != map.layout.nodes || obs.times != map.layout.times {
        return Err(Error::Data("observation layout differs from the map".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("observations contain non-finite values".into()));
    }
    let a = &map.matrix;
    let d = DVector::from_vec(data);
    let w = map.basis.penalty_matrix()?;
    let ata = a.transpose() * a;
    let wtw = w.transpose() * &w;
    let atd = a.transpose() * &d;

    let (alpha, solved) = match rule {
        AlphaRule::Fixed(alpha) => {
            if !(alpha >= 0.0) || !alpha.is_finite() {
                return Err(Error::Domain(format!("alpha must be nonnegative, got {alpha}")));
            }
            (alpha, solve_tikhonov(&ata, &wtw, &atd, a, &d, alpha)?)
        }
        AlphaRule::Discrepancy { tau } => {
            if !(tau > 0.0) {
                return Err(Error::Domain(format!("discrepancy factor must be positive, got {tau}")));
            }
            if !(obs.noise_level > 0.0) {
                return Err(Error::Domain("discrepancy rule needs a positive noise level".into()));
            }
            let sigma = obs.noise_level * d.amax();
            let target = tau * sigma * (d.len() as f64).sqrt();
            let mut last = None;
            for e in ALPHA_EXPONENTS.rev() {
                let alpha = 10f64.powf(e as f64 / 4.0);
                match solve_tikhonov(&ata, &wtw, &atd, a, &d, alpha) {
                    Ok(s) => {
                        let done = s.residual <= target;
                        last = Some((alpha, s));
                        if done {
                            break;
                        }
                    }
                    Err(err) => {
                        if last.is_none() {
                            return Err(err);
                        }
                        break;
                    }
                }
            }
            last.ok_or(Error::IllConditioned { condition: f64::INFINITY })?
        }
    };

    let mut estimate = map.basis.combine(&solved.coefficients);
    for (i, e) in estimate.iter_mut().enumerate() {
        if map.basis.functions.iter().all(|f| f[i].abs() < 1e-13) {
            *e = 0.0;
        }
    }
    Ok(InversionResult {
        estimate,
        coefficients: solved.coefficients,
        alpha,
        residual: solved.residual,
        rel_error: None,
        condition: solved.condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(nx: usize, nt: usize) -> (Grid, ModelParams, EllipticCoefficients, ObservationGeometry) {
        let grid = Grid::new(nx, nt, 1.0).unwrap();
        let params = ModelParams::with_default_window(1.0, 0.5, 1.0).unwrap();
        (grid, params, EllipticCoefficients::laplacian(&grid), ObservationGeometry::default())
    }

    fn r_field(grid: Grid) -> SpaceTime {
        SpaceTime::from_fn(grid, |x, t| 2.0 + (PI * x).sin() * (-t).exp())
    }

    #[test]
    fn noise_level_zero_and_determinism() {
        let data: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        assert_eq!(add_noise(&data, 0.0, 3).unwrap(), data);
        assert_eq!(add_noise(&data, 0.1, 3).unwrap(), add_noise(&data, 0.1, 3).unwrap());
        assert_ne!(add_noise(&data, 0.1, 3).unwrap(), add_noise(&data, 0.1, 4).unwrap());
        assert!(matches!(add_noise(&data, -0.1, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn noise_empirical_std() {
        let data: Vec<f64> = (0..4000).map(|i| (0.01 * i as f64).cos()).collect();
        let noisy = add_noise(&data, 0.01, 7).unwrap();
        let max = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let e: Vec<f64> = noisy.iter().zip(&data).map(|(a, b)| a - b).collect();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let std = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64).sqrt();
        assert!(std >= 0.005 * max && std <= 0.015 * max, "{std}");
    }

    #[test]
    fn observation_layout() {
        let (grid, params, _, geo) = setup(63, 64);
        let field = SpaceTime::from_fn(grid, |x, t| x * t);
        let b = ObservationSet::observe(&field, &params, ObservationKind::Boundary, &geo).unwrap();
        assert_eq!(b.snapshot.len(), grid.n_space());
        assert_eq!(b.nodes, vec![grid.nx + 1]);
        assert_eq!(b.times.len(), 33);
        assert!((b.series[0][0] - 0.25).abs() < 1e-12);
        let i = ObservationSet::observe(&field, &params, ObservationKind::Interior, &geo).unwrap();
        assert!(i.nodes.iter().all(|&n| geo.omega.contains(grid.x(n))));
        assert_eq!(i.series.len(), i.nodes.len());
        i.validate(&grid, &geo).unwrap();
        let round = i.with_stacked(&i.stacked()).unwrap();
        assert_eq!(round, i);
    }

    #[test]
    fn map_columns_and_linearity() {
        let (grid, params, coeffs, geo) = setup(31, 32);
        let basis = source_basis(&grid, ObservationKind::Boundary, &geo, 4).unwrap();
        let ones = SpaceTime::from_fn(grid, |_, _| 1.0);
        let map = assemble_forward_map(&ones, &params, &coeffs, ObservationKind::Boundary, &geo, &basis).unwrap();
        assert!(map.predict(&[0.0; 4]).iter().all(|&v| v == 0.0));

        let source = SpaceTime::from_fn(grid, |x, _| (PI * x).sin() * (PI * x).sin());
        let u = solve_forward(&ForwardProblem::new(params, coeffs.clone(), grid, source)).unwrap();
        let direct = u.level(grid.nearest_level(params.t0));
        let col = map.predict(&[1.0, 0.0, 0.0, 0.0]);
        for (a, b) in direct.iter().zip(&col) {
            assert!((a - b).abs() < 1e-14);
        }

        let c1 = [0.3, -1.0, 2.0, 0.5];
        let c2 = [1.1, 0.2, -0.7, 0.0];
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| a + b).collect();
        let (p1, p2, p12) = (map.predict(&c1), map.predict(&c2), map.predict(&sum));
        let scale = p12.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for k in 0..p12.len() {
            assert!((p1[k] + p2[k] - p12[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn vanishing_r_rejected() {
        let (grid, params, coeffs, geo) = setup(31, 32);
        let basis = source_basis(&grid, ObservationKind::Boundary, &geo, 3).unwrap();
        let r = SpaceTime::from_fn(grid, |x, _| x - 0.5);
        let err = assemble_forward_map(&r, &params, &coeffs, ObservationKind::Boundary, &geo, &basis).unwrap_err();
        assert!(matches!(err, Error::Assumption(_)));
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let (grid, params, coeffs, geo) = setup(31, 32);
        for kind in ObservationKind::ALL {
            let basis = source_basis(&grid, kind, &geo, 6).unwrap();
            let map = assemble_forward_map(&r_field(grid), &params, &coeffs, kind, &geo, &basis).unwrap();
            let obs = map.layout.with_stacked(&vec![0.0; map.layout.len()]).unwrap();
            let res = invert_source(&obs, &map, AlphaRule::Fixed(1e-8)).unwrap();
            assert!(res.estimate.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn source_round_trip_and_linearity() {
        let (grid, params, coeffs, geo) = setup(63, 64);
        let kind = ObservationKind::Boundary;
        let basis = source_basis(&grid, kind, &geo, 8).unwrap();
        let r = r_field(grid);
        let map = assemble_forward_map(&r, &params, &coeffs, kind, &geo, &basis).unwrap();
        let truth: Vec<f64> = grid.xs().iter().map(|&x| (PI * x).sin() * (2.0 * PI * x).sin()).collect();
        let mut g = r.clone();
        for n in 0..grid.n_time() {
            for (v, f) in g.level_mut(n).iter_mut().zip(&truth) {
                *v *= f;
            }
        }
        let u = solve_forward(&ForwardProblem::new(params, coeffs, grid, g)).unwrap();
        let obs = ObservationSet::observe(u.samples(), &params, kind, &geo).unwrap();
        let res = invert_source(&obs, &map, AlphaRule::Fixed(1e-8)).unwrap().with_truth(&truth, grid.dx).unwrap();
        assert!(res.rel_error.unwrap() < 0.05, "{:?}", res.rel_error);
        assert_eq!(res.estimate[0], 0.0);
        assert_eq!(res.estimate[grid.nx + 1], 0.0);

        let scaled = obs.with_stacked(&obs.stacked().iter().map(|v| -3.0 * v).collect::<Vec<_>>()).unwrap();
        let res2 = invert_source(&scaled, &map, AlphaRule::Fixed(1e-8)).unwrap();
        let scale = res.estimate.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in res.estimate.iter().zip(&res2.estimate) {
            assert!((-3.0 * a - b).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn discrepancy_requires_noise_level() {
        let (grid, params, coeffs, geo) = setup(31, 32);
        let basis = source_basis(&grid, ObservationKind::Interior, &geo, 4).unwrap();
        let map = assemble_forward_map(&r_field(grid), &params, &coeffs, ObservationKind::Interior, &geo, &basis).unwrap();
        let err = invert_source(&map.layout, &map, AlphaRule::Discrepancy { tau: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
