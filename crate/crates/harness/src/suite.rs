//! Experiment stages and the assertions checked on their results.

use netulln_core::estimate::{run_consistency_experiment, AuditStatus, ConsistencyConfig, ConsistencyTable};
use netulln_core::funcspace::{ClippedLocationMoments, FunctionFamily};
use netulln_core::netgraph::{find_block_partition, Network};
use netulln_core::process::{OracleMode, Simulator};
use netulln_core::rng::Stream;
use netulln_core::verify::{
    block_moment_check, run_maximal_experiment, run_ulln_experiment, BlockMomentRow, DeltaSchedule, MaximalConfig,
    MaximalResult, UllnConfig, UllnResult,
};
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorChoice, RunConfig};
use crate::diagnose::{self, DiagnoseReport, Status};
use crate::error::HarnessError;
use crate::seeds::Seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub status: Status,
    pub observed: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub choice: EstimatorChoice,
    pub table: ConsistencyTable,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteResults {
    pub ulln: Vec<UllnResult>,
    pub maximal: Option<MaximalResult>,
    pub blocks: Vec<BlockMomentRow>,
    pub estimates: Vec<EstimateOutcome>,
    pub assertions: Vec<AssertionOutcome>,
    pub warnings: Vec<String>,
}

pub fn mode_label(mode: OracleMode) -> &'static str {
    match mode {
        OracleMode::Conditional => "conditional",
        OracleMode::Unconditional => "unconditional",
    }
}

fn net_maker<'a>(cfg: &'a RunConfig, seeds: &'a Seeds) -> impl Fn(usize) -> netulln_core::Result<Network> + Sync + 'a {
    move |n| cfg.network.build(n, seeds.network(n))
}

/// Premises each ULLN mode relies on.
fn ulln_premises(mode: OracleMode) -> &'static [&'static str] {
    match mode {
        OracleMode::Conditional => &[diagnose::DENSENESS_DECAY, diagnose::FAMILY_BOUNDS, diagnose::DECAY_PROFILE],
        OracleMode::Unconditional => &[
            diagnose::DENSENESS_DECAY,
            diagnose::FAMILY_BOUNDS,
            diagnose::DECAY_PROFILE,
            diagnose::DECAY_POWER_BOUND,
            diagnose::SPARSITY_WINDOW,
        ],
    }
}

/// PASS/FAIL from `ok`, downgraded to WAIVED when a premise did not pass.
fn judged(name: String, premise: Status, ok: bool, observed: String, detail: String) -> AssertionOutcome {
    let (status, detail) = match premise {
        Status::Pass => (if ok { Status::Pass } else { Status::Fail }, detail),
        _ => (Status::Waived, format!("premise not met; {detail}")),
    };
    AssertionOutcome { name, status, observed, detail }
}

pub fn run_ulln(cfg: &RunConfig, seeds: &Seeds, diag: &DiagnoseReport, out: &mut SuiteResults) -> Result<(), HarnessError> {
    let Some(sec) = &cfg.ulln else { return Ok(()) };
    let space = cfg.parameter_space.build()?;
    let family = cfg.family.build();
    let make = net_maker(cfg, seeds);
    for &mode in &sec.modes {
        let ucfg = UllnConfig {
            n_grid: sec.n_grid.clone(),
            replications: sec.replications,
            mode,
            delta: sec.delta.unwrap_or(DeltaSchedule::Rate { p: cfg.assumptions.p }),
            oracle_draws: sec.oracle_draws,
            force_monte_carlo: sec.force_monte_carlo,
            se_ceiling: sec.se_ceiling,
            seed: match mode {
                OracleMode::Conditional => seeds.ulln_conditional,
                OracleMode::Unconditional => seeds.ulln_unconditional,
            },
            window: Some((cfg.window(), cfg.assumptions.separation)),
        };
        let res = run_ulln_experiment(&ucfg, &make, &cfg.process, family.as_ref(), &space)?;
        let label = mode_label(mode);
        out.warnings.extend(res.warnings.iter().map(|w| format!("ulln {label}: {w}")));
        let premise = diag.status_of(ulln_premises(mode));
        let medians = res.medians();
        if cfg.assertions.ulln_decreasing == Some(true) {
            out.assertions.push(judged(
                format!("ulln_{label}_decreasing"),
                premise,
                res.strictly_decreasing(),
                format!("{medians:?}"),
                "median sup-deviation strictly decreasing in n".into(),
            ));
        }
        if let Some(max) = cfg.assertions.ulln_max_slope {
            let slope = res.loglog_slope();
            out.assertions.push(judged(
                format!("ulln_{label}_slope"),
                premise,
                slope.is_some_and(|s| s <= max),
                slope.map_or("undefined".into(), |s| format!("{s:.4}")),
                format!("log-log slope of median deviation <= {max}"),
            ));
        }
        out.ulln.push(res);
    }
    Ok(())
}

pub fn run_maximal(cfg: &RunConfig, seeds: &Seeds, diag: &DiagnoseReport, out: &mut SuiteResults) -> Result<(), HarnessError> {
    let Some(sec) = &cfg.maximal else { return Ok(()) };
    let make = net_maker(cfg, seeds);
    let mcfg = MaximalConfig {
        n_grid: sec.n_grid.clone(),
        p: cfg.assumptions.p,
        replications: sec.replications,
        window: cfg.window(),
        separation: cfg.assumptions.separation,
        n_boot: sec.n_boot,
        seed: seeds.maximal,
    };
    let res = run_maximal_experiment(&mcfg, &make, &cfg.process)?;
    out.warnings.extend(res.warnings.iter().map(|w| format!("maximal: {w}")));
    // the growth bound needs the window at every n of the grid, not only at
    // the diagnose size
    let premise = match diag.status_of(&[diagnose::SPARSITY_WINDOW]) {
        Status::Pass if !res.window_holds() => Status::Fail,
        s => s,
    };
    if let Some(slack) = cfg.assertions.maximal_slack {
        out.assertions.push(judged(
            "maximal_growth".into(),
            premise,
            res.within_cap(slack),
            format!("slope {:.4}, CI [{:.4}, {:.4}]", res.fit.slope, res.fit.ci_lo, res.fit.ci_hi),
            format!("CI upper bound <= p*beta + {slack} = {:.4}", res.cap() + slack),
        ));
    }
    if res.rows.iter().any(|r| r.block_sum_violations > 0) {
        out.warnings.push("maximal: block-summing inequality violated in some replication".into());
    }
    out.maximal = Some(res);

    if let Some(bn) = sec.block_n {
        let net = make(bn)?;
        let sim = Simulator::new(&net, &cfg.process)?;
        let mut all_separated = true;
        for &b in &sec.block_sizes {
            let outcome = find_block_partition(&net, b, cfg.assumptions.separation)?;
            all_separated &= outcome.is_feasible();
            let stream = Stream::root(seeds.blocks).index(b as u64);
            out.blocks.push(block_moment_check(&sim, outcome.partition(), cfg.assumptions.p, sec.replications, stream)?);
        }
        if let (Some(limit), false) = (cfg.assertions.block_ratio_spread, out.blocks.is_empty()) {
            let ratios: Vec<f64> = out.blocks.iter().map(|r| r.ratio).collect();
            let hi = ratios.iter().copied().fold(f64::MIN, f64::max);
            let lo = ratios.iter().copied().fold(f64::MAX, f64::min);
            let spread = hi / lo;
            let premise = if all_separated { Status::Pass } else { Status::Fail };
            out.assertions.push(judged(
                "block_moment_spread".into(),
                premise,
                lo > 0.0 && spread < limit,
                format!("{spread:.4}"),
                format!("max/min block moment ratio < {limit}"),
            ));
        }
    }
    Ok(())
}

/// Outcome of the unconditional ULLN assertions, when they were checked.
fn ulln_verdict(out: &SuiteResults) -> Option<bool> {
    let relevant: Vec<&AssertionOutcome> =
        out.assertions.iter().filter(|a| a.name.starts_with("ulln_unconditional")).collect();
    (!relevant.is_empty()).then(|| relevant.iter().all(|a| a.status == Status::Pass))
}

pub fn run_estimate(cfg: &RunConfig, seeds: &Seeds, out: &mut SuiteResults) -> Result<(), HarnessError> {
    let Some(sec) = &cfg.estimate else { return Ok(()) };
    let space = cfg.parameter_space.build()?;
    let make = net_maker(cfg, seeds);
    let m_family = crate::config::m_family(sec.m_cap);
    let gmm_family = ClippedLocationMoments::new(sec.gmm_clips.clone());
    let ulln_passed = ulln_verdict(out);
    for &choice in &sec.estimators {
        let family: &dyn FunctionFamily = match choice {
            EstimatorChoice::M => &m_family,
            _ => &gmm_family,
        };
        let ccfg = ConsistencyConfig {
            estimator: choice.kind(),
            n_grid: sec.n_grid.clone(),
            replications: sec.replications,
            theta0: sec.theta0.clone(),
            delta: sec.delta.unwrap_or(DeltaSchedule::Rate { p: cfg.assumptions.p }),
            refine_tol: sec.refine_tol,
            seed: seeds.estimate,
            audit_points: sec.audit_points,
            ulln_passed,
        };
        let table = run_consistency_experiment(&ccfg, &make, &cfg.process, family, &space)?;
        let audit = &table.audit;
        let failed = [audit.identification, audit.compactness, audit.continuity, audit.ulln].contains(&AuditStatus::Fail);
        let premise = if failed { Status::Fail } else { Status::Pass };
        let label = choice.label();
        let rmse = table.rmse();
        if cfg.assertions.rmse_decreasing == Some(true) {
            out.assertions.push(judged(
                format!("estimate_{label}_rmse_decreasing"),
                premise,
                table.rmse_strictly_decreasing().unwrap_or(false),
                format!("{rmse:?}"),
                "RMSE strictly decreasing in n".into(),
            ));
        }
        if let Some(max) = cfg.assertions.rmse_max_ratio {
            let ratio = table.rmse_ratio();
            out.assertions.push(judged(
                format!("estimate_{label}_rmse_ratio"),
                premise,
                ratio < max,
                format!("{ratio:.4}"),
                format!("RMSE(n_max)/RMSE(n_min) < {max}"),
            ));
        }
        out.estimates.push(EstimateOutcome { choice, table });
    }
    if let Some(factor) = cfg.assertions.gmm_agreement {
        if let Some((gap, scale)) = gmm_gap(out) {
            out.assertions.push(AssertionOutcome {
                name: "estimate_gmm_weighting_agreement".into(),
                status: if gap <= factor * scale { Status::Pass } else { Status::Fail },
                observed: format!("{gap:.6}"),
                detail: format!("RMS paired difference at largest n <= {factor} x larger RMSE ({scale:.6})"),
            });
        }
    }
    Ok(())
}

/// RMS of paired identity-vs-inverse-variance differences at the largest `n`
/// and the larger of the two RMSEs there.
pub fn gmm_gap(out: &SuiteResults) -> Option<(f64, f64)> {
    let find = |c: EstimatorChoice| out.estimates.iter().find(|e| e.choice == c);
    let a = find(EstimatorChoice::GmmIdentity)?;
    let b = find(EstimatorChoice::GmmInverseVariance)?;
    let k = a.table.rows.len() - 1;
    let (ta, tb) = (a.table.theta_hats(k), b.table.theta_hats(k));
    let ss: f64 = ta
        .iter()
        .zip(&tb)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>())
        .sum();
    let gap = (ss / ta.len() as f64).sqrt();
    Some((gap, a.table.rows[k].rmse.max(b.table.rows[k].rmse)))
}
