//! Node-wise evaluation of coefficient and source expressions.
//!
//! Variables `x` and (where allowed) `t`, the constant `pi`, arithmetic with
//! `^` for powers, `sin`, `cos`, `abs`, `log`, plus `exp`, `sqrt` and
//! `bump(x, center, half_width, k)` for the compactly supported polynomial
//! bump `(1 - y^2)^k`.

use fasteval::{Compiler, Evaler};

use crate::functions::polynomial_bump;
use crate::model::{Grid, SpaceTime};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("expression `{expression}`: {detail}")]
pub struct ExprError {
    pub expression: String,
    pub detail: String,
}

pub struct Expr {
    source: String,
    slab: fasteval::Slab,
    instruction: fasteval::Instruction,
    uses_t: bool,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Expr").field("source", &self.source).finish()
    }
}

fn lookup(name: &str, args: &[f64], x: f64, t: Option<f64>) -> Option<f64> {
    match (name, args) {
        ("x", []) => Some(x),
        ("t", []) => t,
        ("pi", []) => Some(std::f64::consts::PI),
        ("exp", [a]) => Some(a.exp()),
        ("sqrt", [a]) => Some(a.sqrt()),
        ("ln", [a]) => Some(a.ln()),
        ("bump", [y, c, w, k]) => Some(polynomial_bump(*y, *c, *w, k.round() as i32)),
        _ => None,
    }
}

impl Expr {
    /// Parses an expression in `x`, and in `t` when `time_dependent`.
    pub fn parse(source: &str, time_dependent: bool) -> Result<Self, ExprError> {
        let err = |detail: String| ExprError { expression: source.to_string(), detail };
        let parser = fasteval::Parser::new();
        let mut slab = fasteval::Slab::new();
        let parsed = parser.parse(source, &mut slab.ps).map_err(|e| err(e.to_string()))?;
        let instruction = parsed.from(&slab.ps).compile(&slab.ps, &mut slab.cs);
        let out = Self { source: source.to_string(), slab, instruction, uses_t: time_dependent };
        // probe once so that unknown names fail at parse time
        let t = time_dependent.then_some(0.5);
        out.eval_inner(0.5, t).map_err(|e| err(e.detail))?;
        Ok(out)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    fn eval_inner(&self, x: f64, t: Option<f64>) -> Result<f64, ExprError> {
        let mut cb = |name: &str, args: Vec<f64>| lookup(name, &args, x, t);
        self.instruction
            .eval(&self.slab, &mut cb)
            .map_err(|e| ExprError { expression: self.source.clone(), detail: e.to_string() })
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64, ExprError> {
        let v = self.eval_inner(x, self.uses_t.then_some(t))?;
        if !v.is_finite() {
            return Err(ExprError {
                expression: self.source.clone(),
                detail: format!("non-finite value at x = {x}, t = {t}"),
            });
        }
        Ok(v)
    }

    pub fn sample_space(&self, grid: &Grid) -> Result<Vec<f64>, ExprError> {
        grid.xs().iter().map(|&x| self.eval(x, 0.0)).collect()
    }

    pub fn sample_space_time(&self, grid: &Grid) -> Result<SpaceTime, ExprError> {
        let mut out = SpaceTime::zeros(*grid);
        for n in 0..grid.n_time() {
            let t = grid.t(n);
            for (i, v) in out.level_mut(n).iter_mut().enumerate() {
                *v = self.eval(grid.x(i), t)?;
            }
        }
        Ok(out)
    }
}
