use rand::Rng;

use super::{BoundCertificate, CertificateKind, FunctionFamily, ParamSpace};
use crate::rng::{Stream, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Sup,
    LipY,
    LipTheta,
}

/// A probe pair whose observed ratio exceeds the claimed bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub y: (f64, f64),
    pub theta: (Vec<f64>, Vec<f64>),
    pub observed: f64,
    pub claimed: f64,
}

/// Largest `|f|`, y-ratio and θ-ratio seen over the probes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub n_probe: usize,
    pub max_abs: f64,
    pub max_lip_y: f64,
    pub max_lip_theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyOutcome {
    /// The family's own certificate survived, or (for families without one) a
    /// probe certificate built from the observed maxima.
    Certified { certificate: BoundCertificate, observed: ProbeReport },
    Violation { witness: Violation, observed: ProbeReport },
}

impl CertifyOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, Self::Certified { .. })
    }

    pub fn observed(&self) -> &ProbeReport {
        match self {
            Self::Certified { observed, .. } | Self::Violation { observed, .. } => observed,
        }
    }
}

fn uniform_theta(space: &ParamSpace, rng: &mut StreamRng) -> Vec<f64> {
    space.lower().iter().zip(space.upper()).map(|(l, u)| l + (u - l) * rng.random::<f64>()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Randomized check of `|f| <= R`, `Lip_y <= L` and `Lip_θ <= L̄`.
///
/// Half the probe pairs are close (perturbations of 1% of the scale) to catch
/// local slopes, half are independent draws. This is evidence, not proof.
pub fn certify_bounds(
    family: &dyn FunctionFamily,
    y_sampler: &dyn Fn(&mut StreamRng) -> f64,
    space: &ParamSpace,
    n_probe: usize,
    seed: u64,
) -> CertifyOutcome {
    let n_probe = n_probe.max(1);
    let claimed = family.certificate();
    let mut rng = Stream::root(seed).stage("certify").rng();
    let m = family.output_dim();
    let (mut fa, mut fb, mut fc) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let widths = space.widths();
    let mut report = ProbeReport { n_probe, max_abs: 0.0, max_lip_y: 0.0, max_lip_theta: 0.0 };
    let mut worst: Option<(f64, Violation)> = None;
    let tol = 1e-9;

    for probe in 0..n_probe {
        let near = probe % 2 == 0;
        let y = y_sampler(&mut rng);
        let y2 = if near { y + 0.01 * (2.0 * rng.random::<f64>() - 1.0) * (1.0 + y.abs()) } else { y_sampler(&mut rng) };
        let theta = uniform_theta(space, &mut rng);
        let mut theta2 = if near {
            theta.iter().zip(&widths).map(|(t, w)| t + 0.01 * w * (2.0 * rng.random::<f64>() - 1.0)).collect()
        } else {
            uniform_theta(space, &mut rng)
        };
        space.clamp(&mut theta2);

        family.eval_into(y, &theta, &mut fa);
        family.eval_into(y2, &theta, &mut fb);
        family.eval_into(y, &theta2, &mut fc);
        let abs = fa.iter().chain(&fb).chain(&fc).map(|v| v.abs()).fold(0.0, f64::max);
        let dy = (y - y2).abs();
        let dt = theta.iter().zip(&theta2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let ry = if dy > 0.0 { max_abs_diff(&fa, &fb) / dy } else { 0.0 };
        let rt = if dt > 0.0 { max_abs_diff(&fa, &fc) / dt } else { 0.0 };
        report.max_abs = report.max_abs.max(abs);
        report.max_lip_y = report.max_lip_y.max(ry);
        report.max_lip_theta = report.max_lip_theta.max(rt);

        if let Some(c) = claimed {
            for (kind, obs, bound) in
                [(ViolationKind::Sup, abs, c.sup), (ViolationKind::LipY, ry, c.lip_y), (ViolationKind::LipTheta, rt, c.lip_theta)]
            {
                let excess = obs - bound * (1.0 + tol) - tol;
                if excess > 0.0 && worst.as_ref().is_none_or(|(e, _)| excess > *e) {
                    let witness = Violation {
                        kind,
                        y: (y, y2),
                        theta: (theta.clone(), theta2.clone()),
                        observed: obs,
                        claimed: bound,
                    };
                    worst = Some((excess, witness));
                }
            }
        }
    }

    match (worst, claimed) {
        (Some((_, witness)), _) => CertifyOutcome::Violation { witness, observed: report },
        (None, Some(certificate)) => CertifyOutcome::Certified { certificate, observed: report },
        (None, None) => CertifyOutcome::Certified {
            certificate: BoundCertificate {
                sup: report.max_abs,
                lip_y: report.max_lip_y,
                lip_theta: report.max_lip_theta,
                kind: CertificateKind::Probe,
            },
            observed: report,
        },
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::funcspace::{ClippedQuadratic, ConstantFamily, WithCertificate};

    fn wide(rng: &mut StreamRng) -> f64 {
        6.0 * rng.random::<f64>() - 3.0
    }

    #[test]
    fn clipped_quadratic_certifies() {
        let space = ParamSpace::interval(-1.0, 1.0).unwrap();
        let out = certify_bounds(&ClippedQuadratic::new(4.0), &wide, &space, 20_000, 1);
        assert!(out.is_certified());
        assert!(out.observed().max_abs <= 4.0);
    }

    #[test]
    fn constant_has_zero_ratios() {
        let space = ParamSpace::interval(-1.0, 1.0).unwrap();
        let out = certify_bounds(&ConstantFamily::new(0.7), &wide, &space, 1000, 1);
        assert_eq!(out.observed().max_lip_y, 0.0);
        assert_eq!(out.observed().max_lip_theta, 0.0);
    }

    #[test]
    fn understated_sup_is_caught() {
        let base = ClippedQuadratic::new(4.0);
        let mut cert = base.certificate().unwrap();
        cert.sup /= 2.0;
        let broken = WithCertificate::new(Arc::new(base), Some(cert));
        let space = ParamSpace::interval(-1.0, 1.0).unwrap();
        match certify_bounds(&broken, &wide, &space, 5000, 2) {
            CertifyOutcome::Violation { witness, .. } => {
                assert_eq!(witness.kind, ViolationKind::Sup);
                assert!(witness.observed > 2.0);
                // the witness reproduces
                let v = broken.eval(witness.y.0, &witness.theta.0).abs()
                    .max(broken.eval(witness.y.1, &witness.theta.0).abs())
                    .max(broken.eval(witness.y.0, &witness.theta.1).abs());
                assert_eq!(v, witness.observed);
            }
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn uncertified_family_gets_probe_certificate() {
        let f = WithCertificate::new(Arc::new(ClippedQuadratic::new(1.0)), None);
        let space = ParamSpace::interval(0.0, 1.0).unwrap();
        let CertifyOutcome::Certified { certificate, .. } = certify_bounds(&f, &wide, &space, 2000, 3) else {
            panic!("no claim, nothing to violate");
        };
        assert_eq!(certificate.kind, CertificateKind::Probe);
        assert!(certificate.sup <= 1.0 && certificate.sup > 0.9);
    }
}
