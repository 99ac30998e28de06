use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gmm_estimate, inverse_variance_weighting, m_estimate, EstimationResult, WeightingScheme};
use crate::error::{invalid, Error, Result};
use crate::funcspace::{build_delta_net, FunctionFamily, ParamSpace};
use crate::netgraph::Network;
use crate::process::{MeanOracle, MonteCarloOracle, OracleMethod, OracleMode, ProcessSpec, Simulator, TabulatedOracle};
use crate::rng::Stream;
use crate::stats;
use crate::verify::DeltaSchedule;

/// Draws per node when the identification audit needs a Monte Carlo oracle.
const AUDIT_DRAWS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Identity,
    /// Diagonal inverse variances of the moments at an identity-weighted pilot.
    InverseVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "estimator")]
pub enum EstimatorKind {
    M,
    Gmm { weighting: Weighting },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyConfig {
    pub estimator: EstimatorKind,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub theta0: Vec<f64>,
    pub delta: DeltaSchedule,
    pub refine_tol: f64,
    pub seed: u64,
    /// Grid points per axis for the identification audit.
    pub audit_points: usize,
    /// Outcome of the ULLN suite for this configuration, if it was run.
    pub ulln_passed: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditStatus {
    Pass,
    Fail,
    NotRun,
}

/// The four conditions of the standard consistency argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmAudit {
    pub identification: AuditStatus,
    pub compactness: AuditStatus,
    pub continuity: AuditStatus,
    pub ulln: AuditStatus,
    pub notes: Vec<String>,
}

impl NmAudit {
    pub fn all_pass(&self) -> bool {
        [self.identification, self.compactness, self.continuity, self.ulln].iter().all(|s| *s == AuditStatus::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationAudit {
    /// Optimizer of the population criterion on the audit grid.
    pub population_optimum: Vec<f64>,
    pub grid_spacing: f64,
    pub oracle: OracleMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub n: usize,
    pub replications: usize,
    pub bias: Vec<f64>,
    pub median_bias: Vec<f64>,
    pub rmse: f64,
    pub q50_abs_error: f64,
    pub q90_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyTable {
    pub estimator: EstimatorKind,
    pub rows: Vec<ConsistencyRow>,
    /// `estimates[k][r]`: replication `r` at `n_grid[k]`.
    pub estimates: Vec<Vec<EstimationResult>>,
    pub audit: NmAudit,
    pub identification: IdentificationAudit,
}

impl ConsistencyTable {
    pub fn rmse(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rmse).collect()
    }

    /// `None` for a single-point grid: nothing to compare.
    pub fn rmse_strictly_decreasing(&self) -> Option<bool> {
        (self.rows.len() > 1).then(|| self.rmse().windows(2).all(|w| w[1] < w[0]))
    }

    /// RMSE at the largest `n` over RMSE at the smallest.
    pub fn rmse_ratio(&self) -> f64 {
        let r = self.rmse();
        r[r.len() - 1] / r[0]
    }

    pub fn theta_hats(&self, k: usize) -> Vec<Vec<f64>> {
        self.estimates[k].iter().map(|e| e.theta_hat.clone()).collect()
    }
}

fn population_criterion(
    cfg: &ConsistencyConfig,
    sim: &Simulator<'_>,
    family: &dyn FunctionFamily,
    space: &ParamSpace,
    points: &[Vec<f64>],
) -> Result<(Vec<f64>, f64, OracleMethod)> {
    let oracle: Box<dyn MeanOracle> = if family.param_dim() == 1 && family.location_kernel().is_some() {
        Box::new(TabulatedOracle::new(sim, family, OracleMode::Unconditional, space.lower()[0], space.upper()[0])?)
    } else {
        Box::new(MonteCarloOracle::new(sim, family, OracleMode::Unconditional, AUDIT_DRAWS)?)
    };
    let vals = oracle.node_average(&[], points, Stream::root(cfg.seed).stage("identification"))?;
    let se = vals.iter().map(|v| v.se).fold(0.0, f64::max);
    let q = vals
        .iter()
        .map(|v| match cfg.estimator {
            EstimatorKind::M => v.mean[0],
            // any positive definite limit has the same zero set; use the identity
            EstimatorKind::Gmm { .. } => v.mean.iter().map(|g| g * g).sum(),
        })
        .collect();
    Ok((q, se, oracle.method()))
}

/// Refuse designs whose population criterion has no unique optimizer near
/// the declared `θ₀`.
fn audit_identification(
    cfg: &ConsistencyConfig,
    sim: &Simulator<'_>,
    family: &dyn FunctionFamily,
    space: &ParamSpace,
) -> Result<IdentificationAudit> {
    let d = space.dim();
    let widest = space.widths().into_iter().fold(0.0, f64::max);
    if widest == 0.0 {
        return Ok(IdentificationAudit { population_optimum: space.center(), grid_spacing: 0.0, oracle: OracleMethod::Analytic });
    }
    let grid = build_delta_net(space, d as f64 * widest / (cfg.audit_points.max(3) - 1) as f64)?;
    let spacing = grid.spacing().into_iter().fold(0.0, f64::max);
    let (q, se, method) = population_criterion(cfg, sim, family, space, grid.points())?;
    let maximize = cfg.estimator == EstimatorKind::M;
    let best = (0..q.len())
        .reduce(|b, j| if (maximize && q[j] > q[b]) || (!maximize && q[j] < q[b]) { j } else { b })
        .expect("nonempty grid");
    let scale = 1.0 + q[best].abs();
    let tol = 1e-9 * scale + 4.0 * se * scale;
    let reach = 2.0 * spacing * (d as f64).sqrt() + 1e-12;
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let opt = &grid.points()[best];
    let near: Vec<usize> = (0..q.len()).filter(|&j| (q[j] - q[best]).abs() <= tol).collect();
    if near.len() == q.len() && q.len() > 1 {
        return Err(Error::NotIdentified("population criterion is flat over the parameter space".into()));
    }
    if let Some(&far) = near.iter().find(|&&j| dist(&grid.points()[j], opt) > reach) {
        return Err(Error::NotIdentified(format!(
            "population criterion has separated optima near {:?} and {:?}",
            opt,
            grid.points()[far]
        )));
    }
    if dist(opt, &cfg.theta0) > reach {
        return Err(Error::NotIdentified(format!(
            "declared theta0 {:?} but the population criterion is optimized near {:?}",
            cfg.theta0, opt
        )));
    }
    Ok(IdentificationAudit { population_optimum: opt.clone(), grid_spacing: spacing, oracle: method })
}

fn estimate_once(
    kind: EstimatorKind,
    values: &[f64],
    family: &dyn FunctionFamily,
    space: &ParamSpace,
    delta: f64,
    tol: f64,
) -> Result<EstimationResult> {
    match kind {
        EstimatorKind::M => m_estimate(values, family, space, delta, tol),
        EstimatorKind::Gmm { weighting } => {
            let identity = WeightingScheme::identity(family.output_dim());
            let first = gmm_estimate(values, family, space, &identity, delta, tol)?;
            match weighting {
                Weighting::Identity => Ok(first),
                Weighting::InverseVariance => {
                    let w = inverse_variance_weighting(values, family, &first.theta_hat)?;
                    gmm_estimate(values, family, space, &w, delta, tol)
                }
            }
        }
    }
}

/// Bias and RMSE of the estimator over an `n` grid, after auditing
/// identification, compactness, continuity and the ULLN outcome.
pub fn run_consistency_experiment(
    cfg: &ConsistencyConfig,
    make_net: &(dyn Fn(usize) -> Result<Network> + Sync),
    spec: &ProcessSpec,
    family: &dyn FunctionFamily,
    space: &ParamSpace,
) -> Result<ConsistencyTable> {
    if cfg.n_grid.is_empty() || cfg.replications == 0 {
        return invalid("consistency experiment needs a nonempty n grid and at least one replication");
    }
    if cfg.theta0.len() != space.dim() || !space.contains(&cfg.theta0) {
        return invalid("theta0 must be a point of the parameter space");
    }
    if family.param_dim() != space.dim() {
        return invalid("family and parameter space disagree on dimension");
    }
    if cfg.estimator == EstimatorKind::M && family.output_dim() != 1 {
        return invalid("M estimation needs a scalar family");
    }

    let first = make_net(cfg.n_grid[0])?;
    let identification = audit_identification(cfg, &Simulator::new(&first, spec)?, family, space)?;
    let mut notes = vec![format!(
        "population optimum {:?} on a grid of spacing {:.4}",
        identification.population_optimum, identification.grid_spacing
    )];
    let continuity = match family.certificate() {
        Some(c) if c.lip_theta.is_finite() => AuditStatus::Pass,
        _ => {
            notes.push("no finite parameter-Lipschitz certificate".into());
            AuditStatus::Fail
        }
    };
    let ulln = match cfg.ulln_passed {
        Some(true) => AuditStatus::Pass,
        Some(false) => AuditStatus::Fail,
        None => AuditStatus::NotRun,
    };
    let audit = NmAudit { identification: AuditStatus::Pass, compactness: AuditStatus::Pass, continuity, ulln, notes };

    let root = Stream::root(cfg.seed).stage("estimate");
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let net = if k == 0 { first.clone() } else { make_net(n)? };
        let sim = Simulator::new(&net, spec)?;
        let delta = cfg.delta.delta(n);
        let stream_n = root.index(k as u64).stage("replication");
        let results: Vec<EstimationResult> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let draw = sim.draw(stream_n.index(r as u64).stage("data"));
                estimate_once(cfg.estimator, &draw.values, family, space, delta, cfg.refine_tol)
            })
            .collect::<Result<_>>()?;
        let d = space.dim();
        let errors: Vec<Vec<f64>> =
            results.iter().map(|e| e.theta_hat.iter().zip(&cfg.theta0).map(|(a, b)| a - b).collect()).collect();
        let norms: Vec<f64> = errors.iter().map(|e| e.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let coord = |c: usize| errors.iter().map(|e| e[c]).collect::<Vec<f64>>();
        rows.push(ConsistencyRow {
            n,
            replications: cfg.replications,
            bias: (0..d).map(|c| stats::mean(&coord(c))).collect(),
            median_bias: (0..d).map(|c| stats::median(&coord(c))).collect(),
            rmse: (norms.iter().map(|v| v * v).sum::<f64>() / norms.len() as f64).sqrt(),
            q50_abs_error: stats::quantile(&norms, 0.5),
            q90_abs_error: stats::quantile(&norms, 0.9),
        });
        estimates.push(results);
    }
    Ok(ConsistencyTable { estimator: cfg.estimator, rows, estimates, audit, identification })
}
