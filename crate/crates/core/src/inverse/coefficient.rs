//! Reductions of the coefficient problems to source problems.

use crate::carleman::{build_d1, build_d2, DistanceFunction};
use crate::error::{Error, Result};
use crate::forward::{solve_forward, ForwardProblem};
use crate::frac_ops::apply_l;
use crate::model::{EllipticCoefficients, Grid, ModelParams, ObservationGeometry, SpaceTime};
use crate::stencil::Differentiator;

use super::{assemble_columns, assemble_forward_map, invert_source, AlphaRule, Basis, InversionResult, ObservationKind, ObservationSet};

/// Solution with time-independent boundary and initial values `lift`:
/// returns `lift + w`, where `w` solves the homogeneous problem with source
/// `g + L lift`.
pub fn solve_lifted(
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    source: &SpaceTime,
    lift: &[f64],
) -> Result<SpaceTime> {
    let grid = source.grid;
    if lift.len() != grid.n_space() {
        return Err(Error::Data("lifting profile does not match the grid".into()));
    }
    let l_lift = apply_l(lift, coeffs, grid.dx)?;
    let mut g = source.clone();
    for n in 0..grid.n_time() {
        for (v, l) in g.level_mut(n).iter_mut().zip(&l_lift) {
            *v += l;
        }
    }
    let w = solve_forward(&ForwardProblem::new(*params, coeffs.clone(), grid, g))?;
    let mut out = w.into_samples();
    for n in 0..grid.n_time() {
        for (v, l) in out.level_mut(n).iter_mut().zip(lift) {
            *v += l;
        }
    }
    Ok(out)
}

fn check_background(background: &SpaceTime, obs: &ObservationSet, params: &ModelParams) -> Result<Grid> {
    let grid = background.grid;
    if obs.snapshot.len() != grid.n_space() {
        return Err(Error::Data("observations do not match the background grid".into()));
    }
    params.validate()?;
    Ok(grid)
}

/// Potential difference `c1 - c2` from observations of `u1`.
///
/// The difference `u1 - u2` solves the source problem with `R = -u2`, so the
/// map is assembled with the background coefficients `coeffs` (those of
/// `u2`) and the basis must vanish on the boundary.
pub fn invert_zeroth_coefficient(
    u1_data: &ObservationSet,
    background: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    geometry: &ObservationGeometry,
    basis: &Basis,
    rule: AlphaRule,
) -> Result<InversionResult> {
    let grid = check_background(background, u1_data, params)?;
    let n0 = grid.nearest_level(params.t0);
    if let Some(i) = background.level(n0).iter().position(|v| !(v.abs() > 0.0)) {
        return Err(Error::Assumption(format!(
            "background u2(x, t0) vanishes at node {i} (x = {:.4})",
            grid.x(i)
        )));
    }
    let own = ObservationSet::observe(background, params, u1_data.kind, geometry)?;
    let data = u1_data.difference(&own)?;
    let r = background.scaled(-1.0);
    let map = assemble_forward_map(&r, params, coeffs, u1_data.kind, geometry, basis)?;
    invert_source(&data, &map, rule)
}

/// Minimum of `|r_x(x, t0) d'(x)|` over the region the observation kind
/// requires, and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Transversality {
    pub min: f64,
    pub x: f64,
}

fn distance_for(kind: ObservationKind, geometry: &ObservationGeometry, grid: &Grid) -> Result<DistanceFunction> {
    match kind {
        ObservationKind::Boundary => Ok(build_d1(geometry, grid)),
        ObservationKind::Interior => build_d2(geometry, grid),
    }
}

/// Boundary kind: every node. Interior kind: nodes outside `omega`.
pub fn transversality(
    r: &SpaceTime,
    params: &ModelParams,
    kind: ObservationKind,
    geometry: &ObservationGeometry,
) -> Result<Transversality> {
    let grid = r.grid;
    let d = distance_for(kind, geometry, &grid)?;
    let dx = Differentiator::second_order(grid.n_space(), grid.dx, 1)?;
    let rx = dx.apply(r.level(grid.nearest_level(params.t0)));
    let mut best = Transversality { min: f64::INFINITY, x: f64::NAN };
    for (i, v) in rx.iter().enumerate() {
        let x = grid.x(i);
        if kind == ObservationKind::Interior && geometry.omega.contains(x) {
            continue;
        }
        let m = (v * d.derivative(x)).abs();
        if m < best.min || best.x.is_nan() {
            best = Transversality { min: m, x };
        }
    }
    Ok(best)
}

/// Linearized diffusion difference `a1 - a2` from observations of `u1`.
///
/// Columns solve the equation with the background coefficients and source
/// `(psi_k r_x)_x`, `r = u2`, discretized with the same flux form as the
/// solver. Fails when the transversality minimum falls below `min_transversality`.
#[allow(clippy::too_many_arguments)]
pub fn invert_diffusion_coefficient(
    u1_data: &ObservationSet,
    background: &SpaceTime,
    params: &ModelParams,
    coeffs: &EllipticCoefficients,
    geometry: &ObservationGeometry,
    basis: &Basis,
    rule: AlphaRule,
    min_transversality: f64,
) -> Result<InversionResult> {
    let grid = check_background(background, u1_data, params)?;
    let tr = transversality(background, params, u1_data.kind, geometry)?;
    if !(tr.min >= min_transversality) {
        return Err(Error::Assumption(format!(
            "transversality |r_x d'| has minimum {:.3e} at x = {:.4}, below {:.3e}",
            tr.min, tr.x, min_transversality
        )));
    }
    for f in &basis.functions {
        for (i, &v) in f.iter().enumerate() {
            if v != 0.0 && geometry.in_outer_region(grid.x(i)) {
                return Err(Error::Assumption(format!(
                    "diffusion basis function is nonzero at x = {:.4}, outside D'",
                    grid.x(i)
                )));
            }
        }
    }
    let own = ObservationSet::observe(background, params, u1_data.kind, geometry)?;
    let data = u1_data.difference(&own)?;
    let zeros = vec![0.0; grid.n_space()];
    let map = assemble_columns(basis, params, coeffs, u1_data.kind, geometry, |psi| {
        let flux = EllipticCoefficients { a: psi.to_vec(), b: zeros.clone(), c: zeros.clone() };
        let mut g = SpaceTime::zeros(grid);
        for n in 0..grid.n_time() {
            let row = apply_l(background.level(n), &flux, grid.dx)?;
            g.level_mut(n).copy_from_slice(&row);
        }
        Ok(g)
    })?;
    invert_source(&data, &map, rule)
}
