//! Run configuration: a TOML file with strict key checking.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use netulln_core::estimate::{EstimatorKind, Weighting};
use netulln_core::funcspace::{ClippedLocationMoments, ClippedQuadratic, FunctionFamily, ParamSpace, Scaled};
use netulln_core::netgraph::{generate, GeneratorSpec, Network, WindowParams};
use netulln_core::process::{OracleMode, ProcessSpec};
use netulln_core::verify::DeltaSchedule;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, HarnessError};

/// Network family; `n` is the size used by `diagnose`, experiments take
/// their sizes from their own grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum NetworkConfig {
    Cycle { n: usize },
    Path { n: usize },
    /// Square grid of side `round(sqrt(n))`.
    Grid { n: usize },
    RandomGeometric { n: usize, radius: f64 },
    ErdosRenyi { n: usize, p_link: f64 },
}

impl NetworkConfig {
    pub fn n(&self) -> usize {
        match *self {
            Self::Cycle { n } | Self::Path { n } | Self::Grid { n } => n,
            Self::RandomGeometric { n, .. } | Self::ErdosRenyi { n, .. } => n,
        }
    }

    pub fn at(&self, n: usize) -> GeneratorSpec {
        match *self {
            Self::Cycle { .. } => GeneratorSpec::Cycle { n },
            Self::Path { .. } => GeneratorSpec::Path { n },
            Self::Grid { .. } => {
                let side = (n as f64).sqrt().round() as usize;
                GeneratorSpec::Grid { rows: side, cols: side }
            }
            Self::RandomGeometric { radius, .. } => GeneratorSpec::RandomGeometric { n, radius },
            Self::ErdosRenyi { p_link, .. } => GeneratorSpec::ErdosRenyi { n, p_link },
        }
    }

    /// Random families draw their graph from `seed`; the others ignore it.
    pub fn build(&self, n: usize, seed: u64) -> netulln_core::Result<Network> {
        generate(&self.at(n), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum FamilyConfig {
    /// `min{(y - θ)², cap}`.
    ClippedQuadratic { cap: f64 },
    /// `clip(y - θ, ±c)` for each `c` in `clips`.
    ClippedLocationMoments { clips: Vec<f64> },
}

impl FamilyConfig {
    pub fn build(&self) -> Box<dyn FunctionFamily> {
        match self {
            Self::ClippedQuadratic { cap } => Box::new(ClippedQuadratic::new(*cap)),
            Self::ClippedLocationMoments { clips } => Box::new(ClippedLocationMoments::new(clips.clone())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// `[lo, hi]` per axis.
    pub bounds: Vec<[f64; 2]>,
}

impl SpaceConfig {
    pub fn build(&self) -> netulln_core::Result<ParamSpace> {
        let b: Vec<(f64, f64)> = self.bounds.iter().map(|[lo, hi]| (*lo, *hi)).collect();
        ParamSpace::new(&b)
    }
}

/// Constants of the dependence and block-size conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assumptions {
    /// Moment order, an integer above 2.
    pub p: u32,
    pub eta: f64,
    pub c1: f64,
    pub c2: f64,
    /// Envelope constant in `ϑ_s <= A s^{-p/(p-1)}`.
    pub a: f64,
    /// Separation constant: blocks need in-block distance `>= separation * b`.
    pub separation: f64,
    /// Largest denseness-decay sum accepted at the diagnose size.
    #[serde(default = "default_denseness_max")]
    pub denseness_max: f64,
}

fn default_denseness_max() -> f64 {
    0.05
}

impl Assumptions {
    pub fn window(&self, d: usize) -> WindowParams {
        WindowParams { p: self.p, d, eta: self.eta, c1: self.c1, c2: self.c2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Replaces the decay table implied by the process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_table: Option<Vec<f64>>,
    #[serde(default = "default_probes")]
    pub certify_probes: usize,
}

fn default_probes() -> usize {
    100_000
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self { decay_table: None, certify_probes: default_probes() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UllnSection {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_modes")]
    pub modes: Vec<OracleMode>,
    /// Defaults to `δ_n = n^{-p/(p²-1)}` with the configured `p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaSchedule>,
    #[serde(default = "default_oracle_draws")]
    pub oracle_draws: usize,
    #[serde(default = "default_se_ceiling")]
    pub se_ceiling: f64,
    #[serde(default)]
    pub force_monte_carlo: bool,
}

fn default_modes() -> Vec<OracleMode> {
    vec![OracleMode::Conditional, OracleMode::Unconditional]
}

fn default_oracle_draws() -> usize {
    4000
}

fn default_se_ceiling() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximalSection {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_boot")]
    pub n_boot: usize,
    /// Block moment ratios at fixed `block_n` over these block sizes.
    #[serde(default)]
    pub block_sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_n: Option<usize>,
}

fn default_boot() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    M,
    GmmIdentity,
    GmmInverseVariance,
}

impl EstimatorChoice {
    pub fn kind(self) -> EstimatorKind {
        match self {
            Self::M => EstimatorKind::M,
            Self::GmmIdentity => EstimatorKind::Gmm { weighting: Weighting::Identity },
            Self::GmmInverseVariance => EstimatorKind::Gmm { weighting: Weighting::InverseVariance },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::M => "m",
            Self::GmmIdentity => "gmm_identity",
            Self::GmmInverseVariance => "gmm_inverse_variance",
        }
    }
}

/// Criterion maximized by the M estimator: the negated clipped quadratic loss.
pub fn m_family(cap: f64) -> Scaled {
    Scaled::new(Arc::new(ClippedQuadratic::new(cap)), -1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub theta0: Vec<f64>,
    pub estimators: Vec<EstimatorChoice>,
    /// Loss cap of the clipped quadratic whose negation the M estimator maximizes.
    #[serde(default = "default_cap")]
    pub m_cap: f64,
    /// Clip levels of the GMM moments.
    #[serde(default = "default_clips")]
    pub gmm_clips: Vec<f64>,
    #[serde(default = "default_refine_tol")]
    pub refine_tol: f64,
    #[serde(default = "default_audit_points")]
    pub audit_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaSchedule>,
}

fn default_cap() -> f64 {
    4.0
}

fn default_clips() -> Vec<f64> {
    vec![0.5, 2.0]
}

fn default_refine_tol() -> f64 {
    1e-6
}

fn default_audit_points() -> usize {
    401
}

/// Pass criteria checked after the experiments. Unset entries are not checked.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ulln_decreasing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ulln_max_slope: Option<f64>,
    /// Allowed excess of the growth-exponent CI upper bound over `p β`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximal_slack: Option<f64>,
    /// Largest max/min ratio of block moments across block sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_ratio_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_decreasing: Option<bool>,
    /// Largest RMSE(n_max) / RMSE(n_min).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse_max_ratio: Option<f64>,
    /// GMM weightings must agree at the largest n within this multiple of
    /// the larger RMSE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmm_agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub network: NetworkConfig,
    pub process: ProcessSpec,
    pub family: FamilyConfig,
    pub parameter_space: SpaceConfig,
    pub assumptions: Assumptions,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ulln: Option<UllnSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximal: Option<MaximalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateSection>,
    #[serde(default)]
    pub assertions: Assertions,
}

impl RunConfig {
    /// Parse and validate. A `.json` path is read as a run manifest and its
    /// resolved config is used.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let src = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            let m: serde_json::Value = serde_json::from_str(&src).map_err(|e| ConfigError::at_line(path, e.line(), e.to_string()))?;
            let inner = m.get("config").cloned().unwrap_or(m);
            let cfg: Self = serde_json::from_value(inner).map_err(|e| ConfigError::new(path, None, e.to_string()))?;
            cfg.validate().map_err(|(field, msg)| ConfigError::new(path, None, msg).field(field))?;
            cfg
        } else {
            Self::parse(&src).map_err(|e| e.with_path(path))?
        };
        Ok(cfg)
    }

    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s.start));
            ConfigError::new(Path::new("<config>"), line, e.message().to_string())
        })?;
        cfg.validate()
            .map_err(|(field, msg)| ConfigError::new(Path::new("<config>"), locate(src, &field), msg).field(field))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dim(&self) -> usize {
        self.parameter_space.bounds.len()
    }

    pub fn window(&self) -> WindowParams {
        self.assumptions.window(self.dim())
    }

    /// First broken constraint as `(dotted.field, message)`.
    pub fn validate(&self) -> Result<(), (String, String)> {
        fn bad<T>(field: &str, msg: impl Into<String>) -> Result<T, (String, String)> {
            Err((field.to_string(), msg.into()))
        }
        let a = &self.assumptions;
        if a.p <= 2 {
            return bad("assumptions.p", format!("p must be an integer greater than 2, got {}", a.p));
        }
        if !(a.eta > 0.0 && a.eta < 1.0) {
            return bad("assumptions.eta", format!("eta must lie in (0, 1), got {}", a.eta));
        }
        for (name, v) in [("c1", a.c1), ("c2", a.c2), ("a", a.a), ("separation", a.separation), ("denseness_max", a.denseness_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("assumptions.{name}"), format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.network.n() < 3 {
            return bad("network.n", "network needs at least 3 nodes");
        }
        match self.network {
            NetworkConfig::ErdosRenyi { p_link, .. } if !(0.0..=1.0).contains(&p_link) => {
                return bad("network.p_link", format!("p_link must lie in [0, 1], got {p_link}"));
            }
            NetworkConfig::RandomGeometric { radius, .. } if !(radius > 0.0) => {
                return bad("network.radius", format!("radius must be positive, got {radius}"));
            }
            _ => {}
        }
        if let Err(e) = self.process.validate() {
            return bad("process", e.to_string());
        }
        if self.parameter_space.bounds.is_empty() {
            return bad("parameter_space.bounds", "parameter space needs at least one axis");
        }
        if let Err(e) = self.parameter_space.build() {
            return bad("parameter_space.bounds", e.to_string());
        }
        match &self.family {
            FamilyConfig::ClippedQuadratic { cap } if !(*cap > 0.0 && cap.is_finite()) => {
                return bad("family.cap", format!("cap must be positive, got {cap}"));
            }
            FamilyConfig::ClippedLocationMoments { clips } if clips.is_empty() || clips.iter().any(|c| !(*c > 0.0)) => {
                return bad("family.clips", "clips must be a nonempty list of positive numbers");
            }
            _ => {}
        }
        if self.dim() != 1 {
            return bad("parameter_space.bounds", "built-in families take a scalar parameter");
        }
        if let Some(u) = &self.ulln {
            grid_ok("ulln", &u.n_grid, u.replications)?;
            if u.modes.is_empty() {
                return bad("ulln.modes", "at least one oracle mode is required");
            }
            if !(u.se_ceiling > 0.0) {
                return bad("ulln.se_ceiling", "se_ceiling must be positive");
            }
        }
        if let Some(m) = &self.maximal {
            grid_ok("maximal", &m.n_grid, m.replications)?;
            if m.n_grid.len() < 4 {
                return bad("maximal.n_grid", "growth fit needs at least 4 sizes");
            }
            if !m.block_sizes.is_empty() && m.block_n.is_none() {
                return bad("maximal.block_n", "block_sizes needs block_n");
            }
            if m.block_sizes.contains(&0) {
                return bad("maximal.block_sizes", "block sizes must be positive");
            }
        }
        if let Some(e) = &self.estimate {
            grid_ok("estimate", &e.n_grid, e.replications)?;
            if e.estimators.is_empty() {
                return bad("estimate.estimators", "at least one estimator is required");
            }
            if e.theta0.len() != self.dim() {
                return bad("estimate.theta0", "theta0 dimension differs from the parameter space");
            }
            if !(e.m_cap > 0.0) {
                return bad("estimate.m_cap", "m_cap must be positive");
            }
            if e.gmm_clips.is_empty() || e.gmm_clips.iter().any(|c| !(*c > 0.0)) {
                return bad("estimate.gmm_clips", "gmm_clips must be a nonempty list of positive numbers");
            }
            if !(e.refine_tol > 0.0) {
                return bad("estimate.refine_tol", "refine_tol must be positive");
            }
        }
        Ok(())
    }
}

fn grid_ok(section: &str, grid: &[usize], reps: usize) -> Result<(), (String, String)> {
    if grid.is_empty() || grid.iter().any(|&n| n < 3) {
        return Err((format!("{section}.n_grid"), "n_grid must list sizes of at least 3".into()));
    }
    if reps == 0 {
        return Err((format!("{section}.replications"), "replications must be positive".into()));
    }
    Ok(())
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, for diagnostics on validated values.
fn locate(src: &str, dotted: &str) -> Option<usize> {
    let (section, key) = match dotted.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", dotted),
    };
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section || (section.is_empty() && current == key) {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}
