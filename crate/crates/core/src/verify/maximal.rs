use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::netgraph::{select_block_partition, BlockPartition, Network, WindowParams};
use crate::process::{ProcessSpec, Simulator};
use crate::rng::Stream;
use crate::stats;

/// Below this many replications a moment estimate carries a warning.
const MIN_REPLICATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSums {
    pub sums: Vec<f64>,
    /// Sum over nodes outside every block.
    pub tail: f64,
}

/// `S_j = Σ_{i ∈ I_j} X_i` for every block, plus the leftover tail.
pub fn block_sums(xs: &[f64], partition: &BlockPartition) -> BlockSums {
    let sums = partition.blocks.iter().map(|b| b.iter().map(|&i| xs[i]).sum()).collect();
    let tail = partition.tail.iter().map(|&i| xs[i]).sum();
    BlockSums { sums, tail }
}

/// `max_j |T_j|^p <= J^{p-1} Σ_j |S_j|^p` with `T_j` the cumulative block sums.
pub fn block_power_sum_holds(sums: &[f64], p: u32) -> bool {
    if sums.is_empty() {
        return true;
    }
    let p = p as i32;
    let mut t = 0.0f64;
    let mut lhs = 0.0f64;
    for s in sums {
        t += s;
        lhs = lhs.max(t.abs().powi(p));
    }
    let rhs = (sums.len() as f64).powi(p - 1) * sums.iter().map(|s| s.abs().powi(p)).sum::<f64>();
    lhs <= rhs * (1.0 + 1e-12)
}

fn running_max_abs(xs: &[f64]) -> f64 {
    let mut s = 0.0f64;
    let mut m = 0.0f64;
    for x in xs {
        s += x;
        m = m.max(s.abs());
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub se: f64,
    pub samples: Vec<f64>,
    pub warning: Option<String>,
}

impl MomentEstimate {
    fn from_samples(samples: Vec<f64>) -> Self {
        let warning = (samples.len() < MIN_REPLICATIONS)
            .then(|| format!("only {} replications; estimate is unreliable", samples.len()));
        let se = if samples.len() > 1 { stats::std_error(&samples) } else { f64::NAN };
        Self { mean: stats::mean(&samples), se, samples, warning }
    }
}

/// Fixed shock from `stream/shock`, fresh innovations per replication.
fn centered_draws<'s>(sim: &'s Simulator<'s>, stream: Stream) -> impl Fn(usize) -> Vec<f64> + Sync + 's {
    let shock_stream = stream.stage("shock");
    let shock = sim.draw_shock(&mut shock_stream.rng());
    let reps = stream.stage("replication");
    move |r: usize| {
        let draw = sim.draw_given_shock(shock.clone(), shock_stream, reps.index(r as u64));
        sim.centered(&draw)
    }
}

/// `E[max_k |Σ_{i<=k} X_i|^p | C]` with `X` the centred process in node order.
pub fn maximal_moment(sim: &Simulator<'_>, p: u32, replications: usize, stream: Stream) -> Result<MomentEstimate> {
    if replications == 0 {
        return invalid("need at least one replication");
    }
    let draw = centered_draws(sim, stream);
    let samples: Vec<f64> =
        (0..replications).into_par_iter().map(|r| running_max_abs(&draw(r)).powi(p as i32)).collect();
    Ok(MomentEstimate::from_samples(samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockMomentRow {
    pub block_size: usize,
    pub blocks: usize,
    pub separation: u32,
    /// `E|S_j|^p` averaged over blocks.
    pub moment: f64,
    pub se: f64,
    /// `moment / b^{p/2}`.
    pub ratio: f64,
}

/// Block `p`-th moments normalized by `b^{p/2}`.
pub fn block_moment_check(
    sim: &Simulator<'_>,
    partition: &BlockPartition,
    p: u32,
    replications: usize,
    stream: Stream,
) -> Result<BlockMomentRow> {
    if p <= 2 {
        return invalid(format!("block moment check needs p > 2, got {p}"));
    }
    if replications < 2 || partition.blocks.is_empty() {
        return invalid("need at least two replications and one block");
    }
    let draw = centered_draws(sim, stream);
    let per_rep: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let sums = block_sums(&draw(r), partition).sums;
            sums.iter().map(|s| s.abs().powi(p as i32)).sum::<f64>() / sums.len() as f64
        })
        .collect();
    let moment = stats::mean(&per_rep);
    let b = partition.block_size;
    Ok(BlockMomentRow {
        block_size: b,
        blocks: partition.blocks.len(),
        separation: partition.separation,
        moment,
        se: stats::std_error(&per_rep),
        ratio: moment / (b as f64).powf(f64::from(p) / 2.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% percentile bootstrap interval for the slope.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Least-squares slope of `log mean(samples[k])` on `log n_grid[k]`, with a
/// bootstrap that resamples replications within each `n`.
pub fn fit_growth_exponent(n_grid: &[usize], samples: &[Vec<f64>], n_boot: usize, seed: u64) -> Result<GrowthFit> {
    if n_grid.len() != samples.len() {
        return invalid("n grid and sample table differ in length");
    }
    if n_grid.len() < 4 {
        return invalid(format!("growth exponent needs at least 4 grid points, got {}", n_grid.len()));
    }
    let means: Vec<f64> = samples.iter().map(|s| stats::mean(s)).collect();
    if let Some((k, m)) = means.iter().enumerate().find(|(_, m)| !(**m > 0.0)) {
        return invalid(format!("moment estimate at n = {} is not positive ({m})", n_grid[k]));
    }
    let lx: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let (intercept, slope) = stats::ols(&lx, &ly);
    let root = Stream::root(seed).stage("bootstrap");
    let boots: Vec<f64> = (0..n_boot)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = root.index(b as u64).rng();
            let ly: Vec<f64> = samples
                .iter()
                .map(|s| {
                    let m = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).sum::<f64>() / s.len() as f64;
                    m.ln()
                })
                .collect();
            ly.iter().all(|v| v.is_finite()).then(|| stats::ols(&lx, &ly).1)
        })
        .collect();
    let (ci_lo, ci_hi) = if boots.is_empty() {
        (slope, slope)
    } else {
        (stats::quantile(&boots, 0.025), stats::quantile(&boots, 0.975))
    };
    Ok(GrowthFit { slope, intercept, ci_lo, ci_hi })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalConfig {
    pub n_grid: Vec<usize>,
    pub p: u32,
    pub replications: usize,
    pub window: WindowParams,
    /// Separation constant `C` in `min in-block distance >= C b`.
    pub separation: f64,
    pub n_boot: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalRow {
    pub n: usize,
    pub moment: f64,
    pub se: f64,
    pub block_size: usize,
    pub window_feasible: bool,
    /// Replications where the block-summing inequality failed (always 0 if
    /// the arithmetic is right).
    pub block_sum_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalResult {
    pub p: u32,
    pub rows: Vec<MaximalRow>,
    pub samples: Vec<Vec<f64>>,
    pub fit: GrowthFit,
    /// `β = max{1 - β1/2, β2}`.
    pub beta: f64,
    pub warnings: Vec<String>,
}

impl MaximalResult {
    /// Theoretical growth cap `p β`.
    pub fn cap(&self) -> f64 {
        f64::from(self.p) * self.beta
    }

    pub fn n_grid(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn window_holds(&self) -> bool {
        self.rows.iter().all(|r| r.window_feasible)
    }

    /// Upper bootstrap bound on the exponent within `slack` of `p β`.
    pub fn within_cap(&self, slack: f64) -> bool {
        self.fit.ci_hi <= self.cap() + slack
    }
}

/// Maximal moments over an `n` grid with the growth-exponent fit and the
/// block-summing audit.
pub fn run_maximal_experiment(
    cfg: &MaximalConfig,
    make_net: &(dyn Fn(usize) -> Result<Network> + Sync),
    spec: &ProcessSpec,
) -> Result<MaximalResult> {
    cfg.window.validate()?;
    if cfg.p != cfg.window.p {
        return invalid("moment order and window p disagree");
    }
    let root = Stream::root(cfg.seed).stage("maximal");
    let mut rows = Vec::new();
    let mut samples = Vec::new();
    let mut warnings = Vec::new();
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let net = make_net(n)?;
        let sel = select_block_partition(&net, &cfg.window, cfg.separation)?;
        if !sel.feasible() {
            warnings.push(format!("n = {n}: block-size window infeasible"));
        }
        let sim = Simulator::new(&net, spec)?;
        let stream = root.index(k as u64);
        let draw = centered_draws(&sim, stream);
        let partition = sel.outcome.as_ref().map(|o| o.partition());
        let per_rep: Vec<(f64, bool)> = (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let xs = draw(r);
                let stat = running_max_abs(&xs).powi(cfg.p as i32);
                (stat, partition.is_none_or(|p| block_power_sum_holds(&block_sums(&xs, p).sums, cfg.p)))
            })
            .collect();
        let est = MomentEstimate::from_samples(per_rep.iter().map(|r| r.0).collect());
        if let Some(w) = &est.warning {
            warnings.push(format!("n = {n}: {w}"));
        }
        rows.push(MaximalRow {
            n,
            moment: est.mean,
            se: est.se,
            block_size: partition.map_or(0, |p| p.block_size),
            window_feasible: sel.feasible(),
            block_sum_violations: per_rep.iter().filter(|r| !r.1).count(),
        });
        samples.push(est.samples);
    }
    let fit = fit_growth_exponent(&cfg.n_grid, &samples, cfg.n_boot, Stream::root(cfg.seed).stage("fit").seed())?;
    Ok(MaximalResult { p: cfg.p, rows, samples, fit, beta: cfg.window.maximal_beta(), warnings })
}
