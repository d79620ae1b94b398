//! Finite-difference stencils on uniform node sets.
//!
//! Weights come from Fornberg's recursion, so any derivative order can be
//! paired with any accuracy order; near the ends of the array the stencil
//! slides inward instead of shrinking, which keeps the accuracy uniform.

use crate::error::{Error, Result};

/// Weights `w[k][j]` such that `f^{(k)}(z) ~ sum_j w[k][j] f(nodes[j])` for
/// `k = 0..=max_deriv`.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Debug, Clone)]
struct NodeStencil {
    start: usize,
    weights: Vec<f64>,
}

/// Precomputed `deriv`-th derivative operator of a given accuracy order
/// along an axis of `n` equally spaced samples with spacing `h`.
#[derive(Debug, Clone)]
pub struct Differentiator {
    n: usize,
    deriv: usize,
    stencils: Vec<NodeStencil>,
}

impl Differentiator {
    /// Central stencils in the interior and one-sided stencils of the same
    /// accuracy near both ends.
    pub fn new(n: usize, h: f64, deriv: usize, accuracy: usize) -> Result<Self> {
        if accuracy == 0 || !accuracy.is_multiple_of(2) {
            return Err(Error::Domain(format!("accuracy order must be even and positive, got {accuracy}")));
        }
        if deriv == 0 {
            return Ok(Self {
                n,
                deriv,
                stencils: (0..n).map(|i| NodeStencil { start: i, weights: vec![1.0] }).collect(),
            });
        }
        let half = deriv.div_ceil(2) - 1 + accuracy / 2;
        let central = 2 * half + 1;
        let one_sided = deriv + accuracy;
        if n < one_sided.max(central) {
            return Err(Error::Sizing(format!(
                "{n} samples are too few for a derivative of order {deriv} at accuracy {accuracy}"
            )));
        }
        let mut cache: Vec<(usize, usize, Vec<f64>)> = Vec::new();
        let mut weights_for = |offset: usize, width: usize| -> Vec<f64> {
            // offset = position of the evaluation point inside the window
            if let Some((_, _, w)) = cache.iter().find(|(o, wd, _)| *o == offset && *wd == width) {
                return w.clone();
            }
            let nodes: Vec<f64> = (0..width).map(|j| j as f64 - offset as f64).collect();
            let w = fornberg_weights(0.0, &nodes, deriv);
            let scale = h.powi(deriv as i32);
            let w: Vec<f64> = w[deriv].iter().map(|v| v / scale).collect();
            cache.push((offset, width, w.clone()));
            w
        };
        let stencils = (0..n)
            .map(|i| {
                if i >= half && i + half < n {
                    NodeStencil { start: i - half, weights: weights_for(half, central) }
                } else {
                    let start = if i < half { 0 } else { n - one_sided };
                    NodeStencil { start, weights: weights_for(i - start, one_sided) }
                }
            })
            .collect();
        Ok(Self { n, deriv, stencils })
    }

    /// Second-order accurate variant.
    pub fn second_order(n: usize, h: f64, deriv: usize) -> Result<Self> {
        Self::new(n, h, deriv, 2)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn deriv(&self) -> usize {
        self.deriv
    }

    pub fn at(&self, f: &[f64], i: usize) -> f64 {
        let s = &self.stencils[i];
        s.weights.iter().zip(&f[s.start..]).map(|(w, v)| w * v).sum()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.n);
        (0..self.n).map(|i| self.at(f, i)).collect()
    }

    /// Like [`apply`](Self::apply), but results within a generous rounding
    /// bound of the stencil sum (`64 eps sum |w_j f_j|`) are returned as 0.
    pub fn apply_flushed(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.n);
        (0..self.n)
            .map(|i| {
                let s = &self.stencils[i];
                let (sum, abs) = s
                    .weights
                    .iter()
                    .zip(&f[s.start..])
                    .fold((0.0, 0.0), |(a, b), (w, v)| (a + w * v, b + (w * v).abs()));
                if sum.abs() <= 64.0 * f64::EPSILON * abs {
                    0.0
                } else {
                    sum
                }
            })
            .collect()
    }
}
