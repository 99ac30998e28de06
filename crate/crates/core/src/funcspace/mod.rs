//! Parameter boxes, bounded Lipschitz function families and δ-nets.

mod certify;
mod families;
mod net;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use certify::{certify_bounds, CertifyOutcome, ProbeReport, Violation, ViolationKind};
pub use families::{ClippedLocationMoments, ClippedQuadratic, ConstantFamily, Scaled, WithCertificate};
pub use net::{build_delta_net, nearest_net_point, DeltaNet};

/// Compact box `Θ = Π [lower_k, upper_k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamSpace {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return invalid("parameter space needs at least one coordinate");
        }
        for (k, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return invalid(format!("coordinate {k}: [{lo}, {hi}] is not a finite nonempty interval"));
            }
        }
        Ok(Self { lower: bounds.iter().map(|b| b.0).collect(), upper: bounds.iter().map(|b| b.1).collect() })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(&[(lo, hi)])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| *l <= *t && *t <= *u)
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (t, (l, u)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *t = t.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Closed-form bounds that hold for every `y` and `θ`.
    Analytic,
    /// Largest ratios seen by random probing; not a proof.
    Probe,
}

/// `|f| <= sup`, `Lip_y(f) <= lip_y`, `Lip_θ(f) <= lip_theta` (Euclidean in θ,
/// max over outputs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub sup: f64,
    pub lip_y: f64,
    pub lip_theta: f64,
    pub kind: CertificateKind,
}

/// `f(y, θ) = g(y - θ)` with scalar `θ`.
pub trait LocationKernel: Send + Sync {
    fn output_dim(&self) -> usize;
    fn kernel_into(&self, z: f64, out: &mut [f64]);
}

/// A map `(y, θ) -> R^m`, pure and thread-safe.
pub trait FunctionFamily: Debug + Send + Sync {
    fn param_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval_into(&self, y: f64, theta: &[f64], out: &mut [f64]);
    fn certificate(&self) -> Option<BoundCertificate>;

    /// Present when the family has location form, enabling exact oracles.
    fn location_kernel(&self) -> Option<&dyn LocationKernel> {
        None
    }

    /// First output.
    fn eval(&self, y: f64, theta: &[f64]) -> f64 {
        let mut out = vec![0.0; self.output_dim()];
        self.eval_into(y, theta, &mut out);
        out[0]
    }
}

/// `(1/n) Σ_i f(y_i, θ)` for every output, summed in index order.
pub fn sample_average(family: &dyn FunctionFamily, values: &[f64], theta: &[f64]) -> Vec<f64> {
    let m = family.output_dim();
    let mut acc = vec![0.0; m];
    let mut buf = vec![0.0; m];
    for &y in values {
        family.eval_into(y, theta, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b;
        }
    }
    let n = values.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_space_validation() {
        assert!(ParamSpace::new(&[]).is_err());
        assert!(ParamSpace::interval(1.0, 0.0).is_err());
        assert!(ParamSpace::interval(0.0, f64::INFINITY).is_err());
        let s = ParamSpace::new(&[(0.0, 1.0), (-2.0, 2.0)]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.center(), vec![0.5, 0.0]);
        assert!((s.diameter() - 17f64.sqrt()).abs() < 1e-15);
        assert!(s.contains(&[1.0, -2.0]));
        assert!(!s.contains(&[1.1, 0.0]));
        let mut t = [2.0, -3.0];
        s.clamp(&mut t);
        assert_eq!(t, [1.0, -2.0]);
    }
}
