//! Assumption report for one configured network size.

use netulln_core::funcspace::{
    certify_bounds, CertificateKind, CertifyOutcome, ClippedLocationMoments, FunctionFamily,
};
use netulln_core::netgraph::{denseness_decay_sum, select_block_partition, shell_stats, Network, INFINITE};
use netulln_core::process::{theoretical_decay, DecayProfile, Simulator};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::seeds::Seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Waived,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Waived => "WAIVED",
        }
    }

    /// Whether this status fails the run.
    pub fn fails(self, strict: bool) -> bool {
        self == Self::Fail || (strict && self == Self::Waived)
    }
}

/// Check names, in report order.
pub const DECAY_PROFILE: &str = "decay_profile";
pub const BOUNDED_VALUES: &str = "bounded_values";
pub const DENSENESS_DECAY: &str = "denseness_decay";
pub const DECAY_POWER_BOUND: &str = "decay_power_bound";
pub const SPARSITY_WINDOW: &str = "sparsity_window";
pub const FAMILY_BOUNDS: &str = "family_bounds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub item: String,
    pub status: Status,
    pub value: Option<f64>,
    pub detail: String,
}

impl Check {
    fn new(item: &str, status: Status, value: Option<f64>, detail: impl Into<String>) -> Self {
        Self { item: item.to_string(), status, value, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub n: usize,
    pub checks: Vec<Check>,
    /// Average shell size by distance.
    pub shells: Vec<f64>,
}

impl DiagnoseReport {
    /// Combined status of the named checks: any FAIL wins, then any WAIVED.
    pub fn status_of(&self, items: &[&str]) -> Status {
        let mut out = Status::Pass;
        for c in self.checks.iter().filter(|c| items.contains(&c.item.as_str())) {
            match c.status {
                Status::Fail => return Status::Fail,
                Status::Waived => out = Status::Waived,
                Status::Pass => {}
            }
        }
        out
    }

    pub fn failures(&self, strict: bool) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.status.fails(strict)).collect()
    }
}

pub fn diagnose(cfg: &RunConfig, seeds: &Seeds) -> Result<DiagnoseReport, HarnessError> {
    let n = cfg.network.n();
    let net = cfg.network.build(n, seeds.network(n))?;
    let sim = Simulator::new(&net, &cfg.process)?;
    let a = &cfg.assumptions;
    let mut checks = Vec::new();

    let (decay, source) = match &cfg.diagnose.decay_table {
        Some(t) => (DecayProfile::exact(t.clone()), "configured table"),
        None => (theoretical_decay(&cfg.process, a.p)?, "process construction"),
    };
    let broken = decay.invariant_violations();
    checks.push(if broken.is_empty() {
        Check::new(DECAY_PROFILE, Status::Pass, None, format!("from {source}"))
    } else {
        Check::new(DECAY_PROFILE, Status::Fail, None, broken.join("; "))
    });

    checks.push(Check::new(
        BOUNDED_VALUES,
        Status::Pass,
        Some(sim.value_bound()),
        "innovation and shock laws are bounded",
    ));

    checks.push(match denseness_decay_sum(&net, &decay) {
        Ok(v) if v <= a.denseness_max => {
            Check::new(DENSENESS_DECAY, Status::Pass, Some(v), format!("<= {}", a.denseness_max))
        }
        Ok(v) => Check::new(DENSENESS_DECAY, Status::Fail, Some(v), format!("exceeds {}", a.denseness_max)),
        Err(e) => Check::new(DENSENESS_DECAY, Status::Fail, None, e.to_string()),
    });

    let pb = decay.power_bound_check(a.a, a.p);
    checks.push(Check::new(
        DECAY_POWER_BOUND,
        if pb.holds && broken.is_empty() { Status::Pass } else { Status::Fail },
        Some(pb.worst_ratio),
        format!("worst ratio to A s^(-p/(p-1)) at s = {}", pb.worst_s),
    ));

    checks.push(window_check(cfg, &net)?);
    checks.push(family_check(cfg, &sim, seeds));

    let s_max = decay.support_end().unwrap_or(4).max(2) + 2;
    let shells = shell_stats(&net, s_max).avg;
    Ok(DiagnoseReport { n, checks, shells })
}

fn window_check(cfg: &RunConfig, net: &Network) -> Result<Check, HarnessError> {
    let sel = select_block_partition(net, &cfg.window(), cfg.assumptions.separation)?;
    let w = &sel.window;
    let range = format!("window [{:.3}, {:.3}]", w.lower, w.upper);
    if !w.exponents_ordered {
        return Ok(Check::new(
            SPARSITY_WINDOW,
            Status::Fail,
            None,
            format!("beta1 = {:.4} exceeds beta2 = {:.4}", w.beta1, w.beta2),
        ));
    }
    let Some(outcome) = &sel.outcome else {
        return Ok(Check::new(SPARSITY_WINDOW, Status::Fail, None, format!("no integer block size in {range}")));
    };
    let part = outcome.partition();
    let sep = if part.separation == INFINITE { f64::INFINITY } else { f64::from(part.separation) };
    let required = cfg.assumptions.separation * part.block_size as f64;
    Ok(if sel.feasible() {
        Check::new(
            SPARSITY_WINDOW,
            Status::Pass,
            Some(sep),
            format!("b = {} with separation {sep} >= {required}; {range}", part.block_size),
        )
    } else {
        Check::new(
            SPARSITY_WINDOW,
            Status::Fail,
            Some(sep),
            format!("best achieved separation {sep} at b = {} (required {required}); {range}", part.block_size),
        )
    })
}

/// Probe every family the configuration uses against its closed-form bounds.
fn family_check(cfg: &RunConfig, sim: &Simulator<'_>, seeds: &Seeds) -> Check {
    let space = cfg.parameter_space.build().expect("validated");
    let mut families: Vec<(String, Box<dyn FunctionFamily>)> = vec![("family".into(), cfg.family.build())];
    if let Some(e) = &cfg.estimate {
        families.push(("m".into(), Box::new(crate::config::m_family(e.m_cap))));
        families.push(("gmm".into(), Box::new(ClippedLocationMoments::new(e.gmm_clips.clone()))));
    }
    let bound = sim.value_bound();
    let sampler = move |rng: &mut netulln_core::rng::StreamRng| bound * (2.0 * rng.random::<f64>() - 1.0);
    let mut status = Status::Pass;
    let mut notes = Vec::new();
    let mut worst_sup: f64 = 0.0;
    for (name, f) in &families {
        match certify_bounds(f.as_ref(), &sampler, &space, cfg.diagnose.certify_probes, seeds.certify) {
            CertifyOutcome::Certified { certificate, observed } => {
                worst_sup = worst_sup.max(observed.max_abs);
                if certificate.kind == CertificateKind::Probe {
                    status = status_max(status, Status::Waived);
                    notes.push(format!("{name}: no closed-form bounds"));
                } else {
                    notes.push(format!(
                        "{name}: R = {}, L = {}, Lbar = {}",
                        certificate.sup, certificate.lip_y, certificate.lip_theta
                    ));
                }
            }
            CertifyOutcome::Violation { witness, .. } => {
                status = Status::Fail;
                notes.push(format!(
                    "{name}: {:?} bound broken at y = {:?}, theta = {:?} ({} > {})",
                    witness.kind, witness.y, witness.theta, witness.observed, witness.claimed
                ));
            }
        }
    }
    Check::new(FAMILY_BOUNDS, status, Some(worst_sup), notes.join("; "))
}

fn status_max(a: Status, b: Status) -> Status {
    match (a, b) {
        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
        (Status::Waived, _) | (_, Status::Waived) => Status::Waived,
        _ => Status::Pass,
    }
}
