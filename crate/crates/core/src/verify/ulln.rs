use rayon::prelude::*;

use super::DeltaSchedule;
use crate::error::{invalid, Error, Result};
use crate::funcspace::{build_delta_net, sample_average, DeltaNet, FunctionFamily, ParamSpace};
use crate::netgraph::{select_block_partition, Network, WindowParams};
use crate::process::{MeanOracle, MonteCarloOracle, OracleMethod, OracleMode, OracleValue, ProcessSpec, Simulator, TabulatedOracle};
use crate::rng::Stream;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupDeviation {
    /// `max_j |(1/n) Σ_i f(Y_i, θ_j) - oracle(θ_j)|` over net points and outputs.
    pub value: f64,
    pub argmax: usize,
    /// `2 L̄ δ`, bounding the gap between the net maximum and the sup over Θ.
    pub slack: Option<f64>,
    pub oracle_se: f64,
}

/// Largest deviation between sample averages and oracle means over the net.
pub fn sup_deviation(
    values: &[f64],
    family: &dyn FunctionFamily,
    net: &DeltaNet,
    oracle: &[OracleValue],
    se_ceiling: f64,
) -> Result<SupDeviation> {
    if oracle.len() != net.len() {
        return invalid(format!("{} oracle values for {} net points", oracle.len(), net.len()));
    }
    let oracle_se = oracle.iter().map(|o| o.se).fold(0.0, f64::max);
    if oracle_se > se_ceiling {
        return Err(Error::OracleTooNoisy { se: oracle_se, ceiling: se_ceiling });
    }
    let mut value = 0.0;
    let mut argmax = 0;
    for (j, (theta, o)) in net.points().iter().zip(oracle).enumerate() {
        let avg = sample_average(family, values, theta);
        let dev = avg.iter().zip(&o.mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if dev > value {
            value = dev;
            argmax = j;
        }
    }
    let slack = family.certificate().map(|c| 2.0 * c.lip_theta * net.delta());
    Ok(SupDeviation { value, argmax, slack, oracle_se })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UllnConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub mode: OracleMode,
    pub delta: DeltaSchedule,
    /// Monte Carlo draws per node when no analytic oracle applies.
    pub oracle_draws: usize,
    pub force_monte_carlo: bool,
    pub se_ceiling: f64,
    pub seed: u64,
    /// Block-size window and separation constant to check at each `n`.
    pub window: Option<(WindowParams, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UllnRow {
    pub n: usize,
    pub delta: f64,
    pub net_size: usize,
    pub median: f64,
    pub upper_quartile: f64,
    pub slack: Option<f64>,
    pub oracle_se: f64,
    pub window_feasible: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UllnResult {
    pub mode: OracleMode,
    pub oracle_method: OracleMethod,
    pub rows: Vec<UllnRow>,
    /// `deviations[k][r]`: replication `r` at `n_grid[k]`.
    pub deviations: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl UllnResult {
    pub fn n_grid(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn medians(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.median).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.medians().windows(2).all(|w| w[1] < w[0])
    }

    /// Slope of log median deviation against log n.
    pub fn loglog_slope(&self) -> Option<f64> {
        if self.rows.len() < 2 || self.rows.iter().any(|r| r.median <= 0.0) {
            return None;
        }
        let x: Vec<f64> = self.rows.iter().map(|r| r.n as f64).collect();
        Some(stats::loglog_slope(&x, &self.medians()))
    }

    pub fn worst_oracle_se(&self) -> f64 {
        self.rows.iter().map(|r| r.oracle_se).fold(0.0, f64::max)
    }
}

fn build_oracle<'a>(
    sim: &'a Simulator<'a>,
    family: &'a dyn FunctionFamily,
    space: &ParamSpace,
    cfg: &UllnConfig,
) -> Result<Box<dyn MeanOracle + 'a>> {
    if !cfg.force_monte_carlo && family.param_dim() == 1 && family.location_kernel().is_some() {
        return Ok(Box::new(TabulatedOracle::new(sim, family, cfg.mode, space.lower()[0], space.upper()[0])?));
    }
    if cfg.oracle_draws < 10 * cfg.replications {
        return invalid(format!(
            "Monte Carlo oracle needs at least 10x the replications in draws ({} < {})",
            cfg.oracle_draws,
            10 * cfg.replications
        ));
    }
    Ok(Box::new(MonteCarloOracle::new(sim, family, cfg.mode, cfg.oracle_draws)?))
}

/// Sup-deviation distribution at each `n`. Conditional mode compares with the
/// oracle under each replication's own shock; unconditional mode integrates
/// the shock out.
pub fn run_ulln_experiment(
    cfg: &UllnConfig,
    make_net: &(dyn Fn(usize) -> Result<Network> + Sync),
    spec: &ProcessSpec,
    family: &dyn FunctionFamily,
    space: &ParamSpace,
) -> Result<UllnResult> {
    if cfg.n_grid.is_empty() || cfg.replications == 0 {
        return invalid("ULLN experiment needs a nonempty n grid and at least one replication");
    }
    if family.param_dim() != space.dim() {
        return invalid("family and parameter space disagree on dimension");
    }
    let root = Stream::root(cfg.seed).stage("ulln");
    let mut rows = Vec::new();
    let mut deviations = Vec::new();
    let mut warnings = Vec::new();
    let mut method = OracleMethod::Analytic;
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let net = make_net(n)?;
        let window_feasible = match &cfg.window {
            Some((params, c)) => {
                let sel = select_block_partition(&net, params, *c)?;
                if !sel.feasible() {
                    warnings.push(format!("n = {n}: block-size window infeasible; result waived, not aborted"));
                }
                Some(sel.feasible())
            }
            None => None,
        };
        let sim = Simulator::new(&net, spec)?;
        let delta = cfg.delta.delta(n);
        let dnet = build_delta_net(space, delta)?;
        let oracle = build_oracle(&sim, family, space, cfg)?;
        method = oracle.method();
        let stream_n = root.index(k as u64);
        // shock-free oracle values are shared by every replication
        let shared = match cfg.mode {
            OracleMode::Unconditional => Some(oracle.node_average(&[], dnet.points(), stream_n.stage("oracle"))?),
            OracleMode::Conditional => None,
        };
        let results: Vec<Result<crate::verify::SupDeviation>> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let rep = stream_n.stage("replication").index(r as u64);
                let draw = sim.draw(rep.stage("data"));
                let owned;
                let values = match &shared {
                    Some(v) => v,
                    None => {
                        owned = oracle.node_average(&draw.common_shock, dnet.points(), rep.stage("oracle"))?;
                        &owned
                    }
                };
                sup_deviation(&draw.values, family, &dnet, values, cfg.se_ceiling)
            })
            .collect();
        let sups = results.into_iter().collect::<Result<Vec<_>>>()?;
        let devs: Vec<f64> = sups.iter().map(|s| s.value).collect();
        rows.push(UllnRow {
            n,
            delta,
            net_size: dnet.len(),
            median: stats::median(&devs),
            upper_quartile: stats::quantile(&devs, 0.75),
            slack: sups[0].slack,
            oracle_se: sups.iter().map(|s| s.oracle_se).fold(0.0, f64::max),
            window_feasible,
        });
        deviations.push(devs);
    }
    Ok(UllnResult { mode: cfg.mode, oracle_method: method, rows, deviations, warnings })
}
