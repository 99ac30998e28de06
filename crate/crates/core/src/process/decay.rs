use serde::{Deserialize, Serialize};

use super::{ProcessKind, ProcessSpec};
use crate::error::{invalid, Result};

/// Dependence coefficients `ϑ_s` as a function of network distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "form")]
pub enum DecayProfile {
    /// `values[s]` for `s < values.len()`; beyond the table the coefficient is
    /// `beyond`, or undefined when `beyond` is `None`.
    ExactTable { values: Vec<f64>, beyond: Option<f64> },
    /// The envelope `A s^{-p/(p-1)}` for `s > 0`, with `ϑ_0 = 1`.
    PowerBound { a: f64, p: u32 },
}

impl DecayProfile {
    /// Finite-support table: zero past the last entry.
    pub fn exact(values: Vec<f64>) -> Self {
        Self::ExactTable { values, beyond: Some(0.0) }
    }

    /// Table that is undefined past its last entry.
    pub fn partial(values: Vec<f64>) -> Self {
        Self::ExactTable { values, beyond: None }
    }

    pub fn power_bound(a: f64, p: u32) -> Self {
        Self::PowerBound { a, p }
    }

    pub fn value(&self, s: usize) -> Option<f64> {
        match self {
            Self::ExactTable { values, beyond } => values.get(s).copied().or(*beyond),
            Self::PowerBound { a, p } => {
                if s == 0 {
                    Some(1.0)
                } else {
                    Some(a * (s as f64).powf(-power_exponent(*p)))
                }
            }
        }
    }

    /// Largest distance that can carry a nonzero coefficient, if finite.
    pub fn support_end(&self) -> Option<usize> {
        match self {
            Self::ExactTable { values, beyond: Some(b) } if *b == 0.0 => Some(values.len().saturating_sub(1)),
            _ => None,
        }
    }

    /// Broken invariants of an exact table (`ϑ_0 = 1`, nonnegative,
    /// non-increasing). Power bounds only need `A > 0` and `p > 2`.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self {
            Self::ExactTable { values, beyond } => {
                if values.first() != Some(&1.0) {
                    out.push(format!("theta_0 must equal 1, got {:?}", values.first()));
                }
                for (s, v) in values.iter().enumerate() {
                    if !(v.is_finite() && *v >= 0.0) {
                        out.push(format!("theta_{s} = {v} is not a nonnegative real"));
                    }
                }
                for s in 1..values.len() {
                    if values[s] > values[s - 1] {
                        out.push(format!("theta increases from s = {} ({}) to s = {s} ({})", s - 1, values[s - 1], values[s]));
                    }
                }
                if let (Some(b), Some(last)) = (beyond, values.last()) {
                    if b > last {
                        out.push(format!("tail value {b} exceeds last table entry {last}"));
                    }
                }
            }
            Self::PowerBound { a, p } => {
                if !(*a > 0.0 && a.is_finite()) {
                    out.push(format!("A must be positive, got {a}"));
                }
                if *p <= 2 {
                    out.push(format!("p must exceed 2, got {p}"));
                }
            }
        }
        out
    }

    /// Check `ϑ_s <= A s^{-p/(p-1)}` for every `s > 0`. Returns the worst
    /// ratio `ϑ_s / (A s^{-p/(p-1)})` and where it occurs.
    pub fn power_bound_check(&self, a: f64, p: u32) -> PowerBoundCheck {
        let q = power_exponent(p);
        match self {
            Self::ExactTable { values, beyond } => {
                let mut worst = (0usize, 0.0f64);
                for (s, v) in values.iter().enumerate().skip(1) {
                    let r = v / (a * (s as f64).powf(-q));
                    if r > worst.1 {
                        worst = (s, r);
                    }
                }
                let tail_ok = matches!(beyond, Some(b) if *b == 0.0);
                PowerBoundCheck { holds: worst.1 <= 1.0 && tail_ok, worst_s: worst.0, worst_ratio: worst.1 }
            }
            Self::PowerBound { a: own, p: own_p } => {
                // A s^{-q'} <= a s^{-q} for all s >= 1 iff own <= a and q' >= q.
                let holds = *own <= a && power_exponent(*own_p) >= q;
                PowerBoundCheck { holds, worst_s: 1, worst_ratio: own / a }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBoundCheck {
    pub holds: bool,
    pub worst_s: usize,
    pub worst_ratio: f64,
}

pub(crate) fn power_exponent(p: u32) -> f64 {
    let p = f64::from(p);
    p / (p - 1.0)
}

/// Decay coefficients implied by the process construction.
///
/// A radius-`r` moving average makes nodes more than `2r` apart share no
/// innovations, so `ϑ_s = 1` up to `2r` and `0` beyond. Untruncated geometric
/// weights have infinite reach and are summarized by the envelope
/// `ϑ_s <= A s^{-p/(p-1)}` with `A = sup_s |ρ|^s s^{p/(p-1)}`.
pub fn theoretical_decay(spec: &ProcessSpec, p: u32) -> Result<DecayProfile> {
    match &spec.kind {
        ProcessKind::GeometricWeights { rho, truncation: None } => {
            if p <= 2 {
                return invalid(format!("power bound needs p > 2, got {p}"));
            }
            let q = power_exponent(p);
            let r = rho.abs();
            if r >= 1.0 {
                return invalid(format!("geometric weights need |rho| < 1, got {rho}"));
            }
            let mut a: f64 = 0.0;
            let mut s = 1.0f64;
            loop {
                let v = r.powf(s) * s.powf(q);
                a = a.max(v);
                if v < a * 1e-12 || s > 1e6 {
                    break;
                }
                s += 1.0;
            }
            Ok(DecayProfile::power_bound(a.max(f64::MIN_POSITIVE), p))
        }
        _ => {
            let r = spec.radius()?;
            Ok(DecayProfile::exact(vec![1.0; 2 * r + 1]))
        }
    }
}
