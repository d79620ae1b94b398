//! JSON run configuration. Unknown keys are rejected everywhere; omitted
//! blocks take their defaults, and the resolved configuration is echoed to
//! `run.json`.

use std::path::{Path, PathBuf};

use crate::carleman::{default_s_grid, LemmaId, ScanResolution, DEFAULT_LAMBDAS};
use crate::forward::{RefinementAxis, TimeStepping};
use crate::inverse::{AlphaRule, ObservationKind, DEFAULT_BASIS_SIZE};
use crate::model::ObservationGeometry;
use crate::stability::{AmplitudeLaw, EnsembleSpec, Unknown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Forward,
    Convergence,
    TransformCheck,
    CarlemanScan,
    InvertSource,
    InvertZeroth,
    InvertDiffusion,
    Stability,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Forward => "forward",
            Experiment::Convergence => "convergence",
            Experiment::TransformCheck => "transform-check",
            Experiment::CarlemanScan => "carleman-scan",
            Experiment::InvertSource => "invert-source",
            Experiment::InvertZeroth => "invert-zeroth",
            Experiment::InvertDiffusion => "invert-diffusion",
            Experiment::Stability => "stability",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub rho1: f64,
    pub rho2: f64,
    pub t_final: f64,
    /// Defaults to `t_final / 2`.
    pub t0: Option<f64>,
    /// Defaults to `t_final / 4`.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub nt: usize,
}

/// Expressions in `x` for `a`, `b`, `c`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientConfig {
    pub a: String,
    pub b: String,
    pub c: String,
    /// Ellipticity constant: `1/mu <= a <= mu`.
    pub mu: f64,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self { a: "1".into(), b: "0".into(), c: "0".into(), mu: 10.0 }
    }
}

impl CoefficientConfig {
    pub fn is_laplacian(&self) -> bool {
        let d = Self::default();
        self.a.trim() == d.a && self.b.trim() == d.b && self.c.trim() == d.c
    }
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    /// Source `g(x, t)`; when absent the manufactured solution
    /// `t^2 sin(pi x)` and its source are used.
    pub source: Option<String>,
    /// Closed-form solution to compare against.
    pub exact: Option<String>,
    pub stepping: TimeStepping,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub axis: RefinementAxis,
    /// Refined counts (`nt` for the time axis, `nx` for space).
    pub levels: Vec<usize>,
    /// Count held fixed on the other axis.
    pub fixed: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { axis: RefinementAxis::Time, levels: vec![128, 256, 512], fixed: 255 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    /// Time-step counts of the residual refinement (manufactured solution).
    pub nt_levels: Vec<usize>,
    /// Data of the source expansion: `f(x)` and `R(x, t)`.
    pub f: String,
    pub r: String,
    /// Data of the diffusion expansion: `a(x)` (zero outside `D'`) and `r(x, t)`.
    pub a_diff: String,
    pub r_diff: String,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            nt_levels: vec![256, 512],
            f: "sin(pi*x)^2".into(),
            r: "2 + sin(pi*x)*exp(-t)".into(),
            a_diff: "bump(x, 0.5, 0.38, 10)".into(),
            r_diff: "(2 + x)*t^2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    pub lemmas: Vec<LemmaId>,
    pub lambdas: Vec<f64>,
    pub s_values: Vec<f64>,
    pub resolution: ScanResolution,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            lemmas: LemmaId::ALL.to_vec(),
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            s_values: default_s_grid(),
            resolution: ScanResolution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertSourceConfig {
    pub kind: ObservationKind,
    pub basis_size: usize,
    pub alpha: AlphaRule,
    /// Relative noise added to synthetic data, seeded by `seed`.
    pub noise_level: f64,
    /// `R(x, t)`.
    pub r: String,
    /// Ground truth `f(x)` used to synthesize data.
    pub truth: Option<String>,
    /// Observation set (JSON) replacing the synthetic data.
    pub observations: Option<PathBuf>,
}

impl Default for InvertSourceConfig {
    fn default() -> Self {
        Self {
            kind: ObservationKind::Boundary,
            basis_size: DEFAULT_BASIS_SIZE,
            alpha: AlphaRule::Fixed(1e-8),
            noise_level: 0.0,
            r: "2 + sin(pi*x)*exp(-t)".into(),
            truth: Some("sin(pi*x)*sin(2*pi*x)".into()),
            observations: None,
        }
    }
}

/// Shared by both coefficient problems. The background `u2` uses the
/// configured coefficients, time-independent boundary and initial values
/// `lift` and source `background_source`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvertCoefficientConfig {
    pub kind: ObservationKind,
    pub basis_size: usize,
    pub alpha: AlphaRule,
    pub noise_level: f64,
    pub background_source: String,
    pub lift: String,
    /// Coefficient difference used to synthesize `u1`.
    pub truth: Option<String>,
    pub observations: Option<PathBuf>,
    /// Smallest accepted `|r_x d'|` (diffusion only).
    pub min_transversality: f64,
}

impl InvertCoefficientConfig {
    pub fn zeroth_default() -> Self {
        Self {
            kind: ObservationKind::Boundary,
            basis_size: DEFAULT_BASIS_SIZE,
            alpha: AlphaRule::Fixed(1e-8),
            noise_level: 0.0,
            background_source: "sin(pi*x)*t".into(),
            lift: "1".into(),
            truth: Some("0.5*sin(pi*x)^2".into()),
            observations: None,
            min_transversality: 1e-3,
        }
    }

    pub fn diffusion_default() -> Self {
        Self {
            alpha: AlphaRule::Fixed(1e-12),
            background_source: "0.5*sin(pi*x)*t".into(),
            lift: "x".into(),
            truth: Some("0.2*bump(x, 0.5, 0.3, 5)".into()),
            ..Self::zeroth_default()
        }
    }
}

fn zeroth_default() -> InvertCoefficientConfig {
    InvertCoefficientConfig::zeroth_default()
}

fn diffusion_default() -> InvertCoefficientConfig {
    InvertCoefficientConfig::diffusion_default()
}

impl Default for InvertCoefficientConfig {
    fn default() -> Self {
        Self::zeroth_default()
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub count: usize,
    pub basis_size: usize,
    pub amplitude: AmplitudeLaw,
    pub amplitude_scale: f64,
    pub kind: ObservationKind,
    pub unknown: Unknown,
    pub check_scaling: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        let d = EnsembleSpec::default();
        Self {
            count: d.count,
            basis_size: d.basis_size,
            amplitude: d.amplitude,
            amplitude_scale: d.amplitude_scale,
            kind: d.kind,
            unknown: d.unknown,
            check_scaling: d.check_scaling,
        }
    }
}

impl EnsembleConfig {
    pub fn spec(&self, seed: u64) -> EnsembleSpec {
        EnsembleSpec {
            count: self.count,
            seed,
            basis_size: self.basis_size,
            amplitude: self.amplitude,
            amplitude_scale: self.amplitude_scale,
            kind: self.kind,
            unknown: self.unknown,
            check_scaling: self.check_scaling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub ensemble: EnsembleConfig,
    /// `R(x, t)` for the source unknown.
    pub r: String,
    /// Background source and lifting for the coefficient unknowns.
    pub background_source: String,
    pub lift: Option<String>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            r: "2 + sin(pi*x)*exp(-t)".into(),
            background_source: "sin(pi*x)*t".into(),
            lift: None,
        }
    }
}

/// Full configuration of one run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub geometry: ObservationGeometry,
    /// Must match the subcommand when given.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub forward: ForwardConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub transform_check: TransformConfig,
    #[serde(default)]
    pub carleman_scan: CarlemanConfig,
    #[serde(default)]
    pub invert_source: InvertSourceConfig,
    #[serde(default = "zeroth_default")]
    pub invert_zeroth: InvertCoefficientConfig,
    #[serde(default = "diffusion_default")]
    pub invert_diffusion: InvertCoefficientConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Schema violation with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration at `{}`: {}", self.path, self.message)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            // missing fields are reported at the parent; name the field itself
            if let Some(rest) = message.strip_prefix("missing field `") {
                if let Some(field) = rest.split('`').next() {
                    path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
                }
            }
            SchemaError { path, message }
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, SchemaError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SchemaError { path: "--config".into(), message: format!("cannot read {}: {e}", path.display()) })?;
        Self::from_json(&text)
    }
}
