//! Configuration-driven experiment runner behind the `fracinv` binary.
//!
//! Exit codes: 0 success, 1 file system failure, 2 invalid configuration,
//! 3 violated assumption or precondition, 4 numerical failure.

pub mod config;
pub mod experiments;
pub mod expr;
pub mod output;
pub mod schema;

use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::model::{EllipticCoefficients, EllipticityDiagnostic, Grid, ModelParams, ObservationGeometry};

pub use config::{Experiment, RunConfig};
use expr::{Expr, ExprError};
use output::OutputDir;

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ASSUMPTION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn config(path: &str, message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: format!("invalid configuration at `{path}`: {message}") }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }

    fn expr(path: &str, e: ExprError) -> Self {
        Self::config(path, e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Assumption(_) | Error::Precondition(_) => EXIT_ASSUMPTION,
            Error::Solver { .. } | Error::IllConditioned { .. } => EXIT_NUMERICAL,
            Error::Sizing(_) | Error::Domain(_) | Error::Data(_) | Error::Geometry(_) | Error::UnsupportedOrder(_) => {
                EXIT_CONFIG
            }
        };
        Self { code, message: e.to_string() }
    }
}

/// Parsed configuration plus the validated objects built from it.
pub struct Resolved {
    pub config: RunConfig,
    pub params: ModelParams,
    pub grid: Grid,
    pub geometry: ObservationGeometry,
    coefficients: [Expr; 3],
}

impl Resolved {
    pub fn new(config: RunConfig) -> Result<Self, CliError> {
        let m = &config.model;
        let params = ModelParams::new(
            m.rho1,
            m.rho2,
            m.t_final,
            m.t0.unwrap_or(0.5 * m.t_final),
            m.delta.unwrap_or(0.25 * m.t_final),
        )
        .map_err(|e| CliError::config("model", e))?;
        let grid = Grid::new(config.grid.nx, config.grid.nt, m.t_final).map_err(|e| CliError::config("grid", e))?;
        config.geometry.validate().map_err(|e| CliError::config("geometry", e))?;
        let c = &config.coefficients;
        let coefficients = [
            Expr::parse(&c.a, false).map_err(|e| CliError::expr("coefficients.a", e))?,
            Expr::parse(&c.b, false).map_err(|e| CliError::expr("coefficients.b", e))?,
            Expr::parse(&c.c, false).map_err(|e| CliError::expr("coefficients.c", e))?,
        ];
        let geometry = config.geometry;
        let out = Self { config, params, grid, geometry, coefficients };
        out.coeffs(&out.grid)?;
        Ok(out)
    }

    /// Coefficients sampled on `grid`, checked for ellipticity.
    pub fn coeffs(&self, grid: &Grid) -> Result<EllipticCoefficients, CliError> {
        let names = ["coefficients.a", "coefficients.b", "coefficients.c"];
        let mut fields = Vec::with_capacity(3);
        for (e, name) in self.coefficients.iter().zip(names) {
            fields.push(e.sample_space(grid).map_err(|err| CliError::expr(name, err))?);
        }
        let c = fields.pop().unwrap_or_default();
        let b = fields.pop().unwrap_or_default();
        let a = fields.pop().unwrap_or_default();
        let coeffs = EllipticCoefficients { a, b, c };
        match coeffs.validate(self.config.coefficients.mu, grid.dx)? {
            EllipticityDiagnostic::Pass => Ok(coeffs),
            EllipticityDiagnostic::Fail { x, value, lower, upper, .. } => Err(CliError::config(
                "coefficients.a",
                format!("a({x:.4}) = {value} outside [{lower}, {upper}]"),
            )),
        }
    }

    pub fn coefficient_expr(&self, k: usize) -> &Expr {
        &self.coefficients[k]
    }

    pub fn expr(&self, path: &str, source: &str, time_dependent: bool) -> Result<Expr, CliError> {
        Expr::parse(source, time_dependent).map_err(|e| CliError::expr(path, e))
    }
}

/// What a successful run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: Experiment,
    pub output: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

/// Loads `config_path`, checks it against `experiment`, writes `run.json`
/// with the resolved configuration and executes the experiment.
pub fn run(experiment: Experiment, config_path: &Path, options: &RunOptions) -> Result<RunReport, CliError> {
    let config = RunConfig::from_path(config_path).map_err(|e| CliError::config(&e.path, e.message))?;
    run_config(experiment, config, options)
}

pub fn run_config(experiment: Experiment, mut config: RunConfig, options: &RunOptions) -> Result<RunReport, CliError> {
    if let Some(named) = config.experiment {
        if named != experiment {
            return Err(CliError::config(
                "experiment",
                format!("configuration names `{}` but `{}` was requested", named.name(), experiment.name()),
            ));
        }
    }
    config.experiment = Some(experiment);
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    let resolved = Resolved::new(config)?;
    let mut out = OutputDir::create(&resolved.config.output)?;
    out.json("run.json", &resolved.config)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = options.workers {
            if n == 0 {
                return Err(CliError::config("--workers", "worker count must be positive"));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| CliError { code: EXIT_NUMERICAL, message: e.to_string() })?
    };
    let summary = pool.install(|| experiments::execute(experiment, &resolved, &mut out))?;
    out.json("summary.json", &summary)?;
    Ok(RunReport {
        experiment,
        output: out.root().to_path_buf(),
        files: out.written().to_vec(),
        summary,
    })
}
