//! Observation aggregates and randomized ensembles sampling the ratio
//! `|unknown| / (|snapshot| + aggregate)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::{solve_forward, ForwardProblem};
use crate::frac_ops::{apply_l, caputo_half_of_derivative, discrete_sobolev_norm};
use crate::inverse::{diffusion_basis, source_basis, Basis, ObservationKind};
use crate::model::{EllipticCoefficients, Grid, ModelParams, ObservationGeometry, Side, SpaceTime};
use crate::quadrature::trapezoid_weights_between;
use crate::stencil::Differentiator;

/// Fewest time steps accepted by the aggregates.
pub const MIN_AGGREGATE_STEPS: usize = 128;

/// Orders of the five time derivatives entering `B` and `I`, in the order
/// returned by [`aggregate_terms`].
pub const AGGREGATE_ORDERS: [f64; 5] = [3.0, 2.5, 2.0, 1.5, 1.0];

/// Derivative margin kept between the window and the ends of `[0, T]`.
const EDGE_LEVELS: usize = 3;

fn time_derivative(series: &[f64], order_index: usize, dt: f64) -> Result<Vec<f64>> {
    match order_index {
        0 => Ok(Differentiator::second_order(series.len(), dt, 3)?.apply(series)),
        1 => caputo_half_of_derivative(series, 2, dt),
        2 => Ok(Differentiator::second_order(series.len(), dt, 2)?.apply(series)),
        3 => caputo_half_of_derivative(series, 1, dt),
        _ => Ok(Differentiator::second_order(series.len(), dt, 1)?.apply(series)),
    }
}

fn check_window(grid: &Grid, params: &ModelParams) -> Result<()> {
    if grid.nt < MIN_AGGREGATE_STEPS {
        return Err(Error::Sizing(format!(
            "aggregates need nt >= {MIN_AGGREGATE_STEPS}, got {}",
            grid.nt
        )));
    }
    let (lo, hi) = params.window();
    let margin = EDGE_LEVELS as f64 * grid.dt;
    if lo < margin || hi > grid.t_final - margin {
        return Err(Error::Domain(format!(
            "window ({lo}, {hi}) must stay {EDGE_LEVELS} steps away from 0 and T = {}",
            grid.t_final
        )));
    }
    Ok(())
}

/// The five `L^2` norms of `B` (boundary kind, flux at the observed end) or
/// `I` (interior kind, values on `omega`), highest order first.
pub fn aggregate_terms(
    u: &SpaceTime,
    kind: ObservationKind,
    geometry: &ObservationGeometry,
    params: &ModelParams,
) -> Result<[f64; 5]> {
    let grid = u.grid;
    check_window(&grid, params)?;
    let (lo, hi) = params.window();
    let wt = trapezoid_weights_between(grid.n_time(), 0.0, grid.dt, lo, hi);
    let (series, ws): (Vec<Vec<f64>>, Vec<f64>) = match kind {
        ObservationKind::Boundary => {
            let d = Differentiator::second_order(grid.n_space(), grid.dx, 1)?;
            let node = match geometry.gamma {
                Side::Left => 0,
                Side::Right => grid.nx + 1,
            };
            let flux = (0..grid.n_time()).map(|n| d.at(u.level(n), node)).collect();
            (vec![flux], vec![1.0])
        }
        ObservationKind::Interior => {
            let w = trapezoid_weights_between(grid.n_space(), 0.0, grid.dx, geometry.omega.lo, geometry.omega.hi);
            let nodes: Vec<usize> = (0..grid.n_space()).filter(|&i| w[i] > 0.0).collect();
            (nodes.iter().map(|&i| u.node_series(i)).collect(), nodes.iter().map(|&i| w[i]).collect())
        }
    };
    let mut out = [0.0; 5];
    for (k, o) in out.iter_mut().enumerate() {
        let mut sq = 0.0;
        for (s, &w) in series.iter().zip(&ws) {
            let d = time_derivative(s, k, grid.dt)?;
            sq += w * d.iter().zip(&wt).map(|(v, q)| q * v * v).sum::<f64>();
        }
        *o = sq.sqrt();
    }
    Ok(out)
}

/// Boundary aggregate `B`.
pub fn aggregate_b(u: &SpaceTime, geometry: &ObservationGeometry, params: &ModelParams) -> Result<f64> {
    Ok(aggregate_terms(u, ObservationKind::Boundary, geometry, params)?.iter().sum())
}

/// Interior aggregate `I`.
pub fn aggregate_i(u: &SpaceTime, geometry: &ObservationGeometry, params: &ModelParams) -> Result<f64> {
    Ok(aggregate_terms(u, ObservationKind::Interior, geometry, params)?.iter().sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unknown {
    #[default]
    Source,
    Zeroth,
    Diffusion,
}

impl Unknown {
    /// Sobolev orders of the unknown and of the snapshot.
    pub fn norm_orders(self) -> (usize, usize) {
        match self {
            Unknown::Source | Unknown::Zeroth => (2, 4),
            Unknown::Diffusion => (3, 5),
        }
    }

    /// Fewest interior nodes for resolution-stable snapshot norms.
    pub fn min_nx(self) -> usize {
        match self {
            Unknown::Source | Unknown::Zeroth => 256,
            Unknown::Diffusion => 384,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    /// `c_k` uniform in `[-1, 1] / k^2`.
    #[default]
    InverseSquare,
    Zero,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    pub basis_size: usize,
    pub amplitude: AmplitudeLaw,
    /// Common factor applied to every drawn coefficient.
    pub amplitude_scale: f64,
    pub kind: ObservationKind,
    pub unknown: Unknown,
    /// Also evaluate each member at twice its amplitude and report the
    /// largest relative change of the ratio.
    pub check_scaling: bool,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            count: 50,
            seed: 0,
            basis_size: 12,
            amplitude: AmplitudeLaw::InverseSquare,
            amplitude_scale: 1.0,
            kind: ObservationKind::Boundary,
            unknown: Unknown::Source,
            check_scaling: true,
        }
    }
}

pub const MIN_ENSEMBLE: usize = 10;

/// Members whose denominator falls below this are degenerate.
pub const DEGENERATE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StabilityRecord {
    pub member: usize,
    pub unknown_norm: f64,
    pub snapshot_norm: f64,
    pub aggregate: f64,
    pub ratio: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnsembleSummary {
    pub count: usize,
    pub degenerate: usize,
    /// Empirical constant: the largest ratio.
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_member: Option<usize>,
    /// `max_ratio / min_ratio` over nondegenerate members.
    pub spread: Option<f64>,
    /// Largest `|ratio(2f) - ratio(f)| / ratio(f)`, when checked.
    pub scaling_deviation: Option<f64>,
}

/// What drives the linear map from the unknown to the solution.
#[derive(Debug, Clone)]
pub enum Driver {
    /// Source `f R`.
    Source(SpaceTime),
    /// Linearized potential problem: source `-f u2`.
    Zeroth(SpaceTime),
    /// Linearized diffusion problem: source `(a r_x)_x`.
    Diffusion(SpaceTime),
}

impl Driver {
    fn field(&self) -> &SpaceTime {
        match self {
            Driver::Source(f) | Driver::Zeroth(f) | Driver::Diffusion(f) => f,
        }
    }

    fn unknown(&self) -> Unknown {
        match self {
            Driver::Source(_) => Unknown::Source,
            Driver::Zeroth(_) => Unknown::Zeroth,
            Driver::Diffusion(_) => Unknown::Diffusion,
        }
    }

    fn source(&self, unknown: &[f64]) -> Result<SpaceTime> {
        let field = self.field();
        let grid = field.grid;
        let mut g = SpaceTime::zeros(grid);
        match self {
            Driver::Source(r) | Driver::Zeroth(r) => {
                let sign = if matches!(self, Driver::Zeroth(_)) { -1.0 } else { 1.0 };
                for n in 0..grid.n_time() {
                    for ((v, a), b) in g.level_mut(n).iter_mut().zip(r.level(n)).zip(unknown) {
                        *v = sign * a * b;
                    }
                }
            }
            Driver::Diffusion(r) => {
                let zeros = vec![0.0; grid.n_space()];
                let flux = EllipticCoefficients { a: unknown.to_vec(), b: zeros.clone(), c: zeros };
                for n in 0..grid.n_time() {
                    let row = apply_l(r.level(n), &flux, grid.dx)?;
                    g.level_mut(n).copy_from_slice(&row);
                }
            }
        }
        Ok(g)
    }
}

fn member_coefficients(spec: &EnsembleSpec, member: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(member as u64);
    (1..=spec.basis_size)
        .map(|k| {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            match spec.amplitude {
                AmplitudeLaw::InverseSquare => spec.amplitude_scale * u / (k * k) as f64,
                AmplitudeLaw::Zero => 0.0,
            }
        })
        .collect()
}

struct Evaluation {
    unknown_norm: f64,
    snapshot_norm: f64,
    aggregate: f64,
}

impl Evaluation {
    fn ratio(&self) -> Option<f64> {
        let den = self.snapshot_norm + self.aggregate;
        (self.unknown_norm > 0.0 && den >= DEGENERATE_FLOOR).then(|| self.unknown_norm / den)
    }
}

struct Context<'a> {
    spec: &'a EnsembleSpec,
    params: &'a ModelParams,
    coeffs: &'a EllipticCoefficients,
    geometry: &'a ObservationGeometry,
    driver: &'a Driver,
    basis: Basis,
}

impl Context<'_> {
    fn evaluate(&self, unknown: &[f64]) -> Result<Evaluation> {
        let grid = self.driver.field().grid;
        let (ku, ks) = self.spec.unknown.norm_orders();
        let source = self.driver.source(unknown)?;
        let u = solve_forward(&ForwardProblem::new(*self.params, self.coeffs.clone(), grid, source))?;
        let u = u.samples();
        let snapshot = u.level(grid.nearest_level(self.params.t0));
        let aggregate = aggregate_terms(u, self.spec.kind, self.geometry, self.params)?.iter().sum();
        Ok(Evaluation {
            unknown_norm: discrete_sobolev_norm(unknown, ku, grid.dx)?,
            snapshot_norm: discrete_sobolev_norm(snapshot, ks, grid.dx)?,
            aggregate,
        })
    }

    fn member(&self, id: usize) -> Result<(StabilityRecord, Option<f64>)> {
        let c = member_coefficients(self.spec, id);
        let unknown = self.basis.combine(&c);
        let e = self.evaluate(&unknown)?;
        let ratio = e.ratio();
        let deviation = match (self.spec.check_scaling, ratio) {
            (true, Some(r)) => {
                let doubled: Vec<f64> = unknown.iter().map(|v| 2.0 * v).collect();
                self.evaluate(&doubled)?.ratio().map(|r2| (r2 - r).abs() / r)
            }
            _ => None,
        };
        let record = StabilityRecord {
            member: id,
            unknown_norm: e.unknown_norm,
            snapshot_norm: e.snapshot_norm,
            aggregate: e.aggregate,
            ratio,
            degenerate: ratio.is_none(),
        };
        Ok((record, deviation))
    }
}

/// Draws `spec.count` unknowns from the constrained basis, solves the
/// linear problem for each and records the stability ratio. Members run in
/// parallel on the current rayon pool; records come back sorted by member.
pub fn run_stability_ensemble(
    spec: &EnsembleSpec,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    geometry: &ObservationGeometry,
    driver: &Driver,
) -> Result<(Vec<StabilityRecord>, EnsembleSummary)> {
    if spec.count < MIN_ENSEMBLE {
        return Err(Error::Sizing(format!("ensembles need at least {MIN_ENSEMBLE} members, got {}", spec.count)));
    }
    if !spec.amplitude_scale.is_finite() {
        return Err(Error::Domain("amplitude scale must be finite".into()));
    }
    if driver.unknown() != spec.unknown {
        return Err(Error::Data("driver does not match the unknown of the ensemble".into()));
    }
    let grid = driver.field().grid;
    if grid.nx < spec.unknown.min_nx() {
        return Err(Error::Sizing(format!(
            "{:?} ensembles need nx >= {} for resolution-stable snapshot norms, got {}",
            spec.unknown,
            spec.unknown.min_nx(),
            grid.nx
        )));
    }
    check_window(&grid, params)?;
    let t0_level = grid.nearest_level(params.t0);
    let background = driver.field().level(t0_level);
    match driver {
        Driver::Source(_) | Driver::Zeroth(_) => {
            if let Some(i) = background.iter().position(|v| !(v.abs() > 0.0)) {
                return Err(Error::Assumption(format!(
                    "driving field vanishes at t0 at node {i} (x = {:.4})",
                    grid.x(i)
                )));
            }
        }
        Driver::Diffusion(r) => {
            let t = crate::inverse::transversality(r, params, spec.kind, geometry)?;
            if !(t.min > 0.0) {
                return Err(Error::Assumption(format!(
                    "transversality |r_x d'| vanishes at x = {:.4}",
                    t.x
                )));
            }
        }
    }
    let basis = match spec.unknown {
        Unknown::Source | Unknown::Zeroth => source_basis(&grid, spec.kind, geometry, spec.basis_size)?,
        Unknown::Diffusion => diffusion_basis(&grid, spec.kind, geometry, spec.basis_size)?,
    };
    let ctx = Context { spec, params, coeffs, geometry, driver, basis };
    let results: Vec<(StabilityRecord, Option<f64>)> = (0..spec.count)
        .into_par_iter()
        .map(|id| {
            ctx.member(id).map_err(|e| match e {
                Error::Solver { step, detail } => Error::Solver { step, detail: format!("member {id}: {detail}") },
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<StabilityRecord> = Vec::with_capacity(results.len());
    let mut deviation: Option<f64> = None;
    for (r, d) in results {
        if let Some(d) = d {
            deviation = Some(deviation.map_or(d, |m: f64| m.max(d)));
        }
        records.push(r);
    }
    records.sort_by_key(|r| r.member);
    let summary = summarize(&records, deviation);
    Ok((records, summary))
}

pub fn summarize(records: &[StabilityRecord], scaling_deviation: Option<f64>) -> EnsembleSummary {
    let mut ratios: Vec<(f64, usize)> = records.iter().filter_map(|r| r.ratio.map(|v| (v, r.member))).collect();
    ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    let median = match ratios.len() {
        0 => None,
        n if n % 2 == 1 => Some(ratios[n / 2].0),
        n => Some(0.5 * (ratios[n / 2 - 1].0 + ratios[n / 2].0)),
    };
    let min = ratios.first().map(|r| r.0);
    let max = ratios.last().map(|r| r.0);
    EnsembleSummary {
        count: records.len(),
        degenerate: records.iter().filter(|r| r.degenerate).count(),
        max_ratio: max,
        median_ratio: median,
        min_ratio: min,
        max_member: ratios.last().map(|r| r.1),
        spread: match (max, min) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        },
        scaling_deviation,
    }
}
