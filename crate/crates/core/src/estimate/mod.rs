//! M and GMM estimation over a compact box.
//!
//! Both estimators scan a δ-net (ties to the lowest index) and then refine
//! inside the winning lattice cell: golden section in one dimension, compass
//! search otherwise. Refinement only replaces the net point on strict
//! improvement, so the result is never worse than the scan.

mod experiment;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::funcspace::{build_delta_net, sample_average, FunctionFamily, ParamSpace};

pub use experiment::{
    run_consistency_experiment, AuditStatus, ConsistencyConfig, ConsistencyRow, ConsistencyTable, EstimatorKind,
    IdentificationAudit, NmAudit, Weighting,
};

/// `Q_n(θ) = (1/n) Σ f(Y_i, θ)`.
pub fn m_criterion(values: &[f64], family: &dyn FunctionFamily, theta: &[f64]) -> Result<f64> {
    if family.output_dim() != 1 {
        return invalid("M criterion needs a scalar family");
    }
    Ok(sample_average(family, values, theta)[0])
}

/// Positive-definite weighting matrix, with the limit it is meant to converge to.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingScheme {
    matrix: DMatrix<f64>,
    limit: Option<DMatrix<f64>>,
}

fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return invalid("weighting matrix must be square and nonempty");
    }
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("weighting matrix has non-finite entries");
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-12 * scale {
        return invalid("weighting matrix is not symmetric");
    }
    if m.clone().cholesky().is_none() {
        return invalid("weighting matrix is not positive definite");
    }
    Ok(())
}

impl WeightingScheme {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        check_spd(&matrix)?;
        Ok(Self { matrix, limit: None })
    }

    pub fn identity(m: usize) -> Self {
        Self { matrix: DMatrix::identity(m, m), limit: Some(DMatrix::identity(m, m)) }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn with_limit(mut self, limit: DMatrix<f64>) -> Result<Self> {
        check_spd(&limit)?;
        if limit.shape() != self.matrix.shape() {
            return invalid("limit and weighting matrix differ in shape");
        }
        self.limit = Some(limit);
        Ok(self)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn limit(&self) -> Option<&DMatrix<f64>> {
        self.limit.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn quadratic(&self, v: &[f64]) -> f64 {
        let m = v.len();
        let mut q = 0.0;
        for a in 0..m {
            for b in 0..m {
                q += v[a] * self.matrix[(a, b)] * v[b];
            }
        }
        q.max(0.0)
    }
}

/// `Q_n(θ) = f̄_n(θ)ᵀ W f̄_n(θ)`.
pub fn gmm_criterion(values: &[f64], family: &dyn FunctionFamily, theta: &[f64], w: &WeightingScheme) -> Result<f64> {
    if w.dim() != family.output_dim() {
        return invalid(format!("weighting matrix is {0}x{0} but the family has {1} moments", w.dim(), family.output_dim()));
    }
    Ok(w.quadratic(&sample_average(family, values, theta)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetStage {
    pub index: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub net_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineStage {
    pub point: Vec<f64>,
    pub value: f64,
    /// Whether refinement beat the net point.
    pub improved: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub theta_hat: Vec<f64>,
    pub criterion_value: f64,
    pub net_stage: NetStage,
    pub refine_stage: RefineStage,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sense {
    Max,
    Min,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Max => a > b,
            Sense::Min => a < b,
        }
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn optimize(
    space: &ParamSpace,
    net_delta: f64,
    refine_tol: f64,
    sense: Sense,
    mut q: impl FnMut(&[f64]) -> f64,
) -> Result<EstimationResult> {
    if !(refine_tol > 0.0 && refine_tol.is_finite()) {
        return invalid(format!("refine_tol must be positive, got {refine_tol}"));
    }
    let net = build_delta_net(space, net_delta)?;
    let mut evals = 0usize;
    let mut best = (0usize, f64::NAN);
    for (j, p) in net.points().iter().enumerate() {
        let v = q(p);
        evals += 1;
        if j == 0 || sense.better(v, best.1) {
            best = (j, v);
        }
    }
    let start = net.points()[best.0].clone();
    let net_stage = NetStage { index: best.0, point: start.clone(), value: best.1, net_size: net.len() };

    // the winning cell, clipped to the box
    let spacing = net.spacing();
    let cell_lo: Vec<f64> = start.iter().zip(&spacing).zip(space.lower()).map(|((c, s), l)| (c - s).max(*l)).collect();
    let cell_hi: Vec<f64> = start.iter().zip(&spacing).zip(space.upper()).map(|((c, s), u)| (c + s).min(*u)).collect();

    let mut point = start.clone();
    let mut value = best.1;
    let mut iterations = 0;
    let mut converged = true;
    if space.dim() == 1 {
        let (mut a, mut b) = (cell_lo[0], cell_hi[0]);
        if b > a {
            let mut c = b - GOLDEN * (b - a);
            let mut d = a + GOLDEN * (b - a);
            let mut fc = q(&[c]);
            let mut fd = q(&[d]);
            evals += 2;
            while b - a > refine_tol {
                iterations += 1;
                if iterations > 500 {
                    converged = false;
                    break;
                }
                if !sense.better(fd, fc) {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - GOLDEN * (b - a);
                    fc = q(&[c]);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + GOLDEN * (b - a);
                    fd = q(&[d]);
                }
                evals += 1;
            }
            let cand = [0.5 * (a + b)];
            let mut bracket = [(cand[0], q(&cand)), (a, q(&[a])), (b, q(&[b]))];
            evals += 3;
            // lowest index wins ties inside the bracket too
            bracket.sort_by(|x, y| x.0.total_cmp(&y.0));
            for (t, v) in bracket {
                if sense.better(v, value) {
                    point = vec![t];
                    value = v;
                }
            }
        }
    } else {
        let mut step: Vec<f64> = spacing.iter().map(|s| 0.5 * s).collect();
        loop {
            if step.iter().all(|s| *s <= refine_tol) {
                break;
            }
            iterations += 1;
            if iterations > 10_000 {
                converged = false;
                break;
            }
            let mut moved = false;
            for k in 0..space.dim() {
                for dir in [-1.0, 1.0] {
                    let mut cand = point.clone();
                    cand[k] = (cand[k] + dir * step[k]).clamp(cell_lo[k], cell_hi[k]);
                    let v = q(&cand);
                    evals += 1;
                    if sense.better(v, value) {
                        point = cand;
                        value = v;
                        moved = true;
                    }
                }
            }
            if !moved {
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
    }
    space.clamp(&mut point);
    let refine_stage = RefineStage { point: point.clone(), value, improved: point != start, iterations };
    Ok(EstimationResult {
        theta_hat: point,
        criterion_value: value,
        net_stage,
        refine_stage,
        diagnostics: Diagnostics { evaluations: evals, converged },
    })
}

/// `argmax_θ Q_n(θ)` by net scan plus refinement.
pub fn m_estimate(
    values: &[f64],
    family: &dyn FunctionFamily,
    space: &ParamSpace,
    net_delta: f64,
    refine_tol: f64,
) -> Result<EstimationResult> {
    if family.output_dim() != 1 || family.param_dim() != space.dim() {
        return invalid("M estimation needs a scalar family on the parameter space");
    }
    optimize(space, net_delta, refine_tol, Sense::Max, |t| sample_average(family, values, t)[0])
}

/// `argmin_θ f̄_n(θ)ᵀ W f̄_n(θ)` by net scan plus refinement.
pub fn gmm_estimate(
    values: &[f64],
    family: &dyn FunctionFamily,
    space: &ParamSpace,
    w: &WeightingScheme,
    net_delta: f64,
    refine_tol: f64,
) -> Result<EstimationResult> {
    if family.param_dim() != space.dim() {
        return invalid("family and parameter space disagree on dimension");
    }
    gmm_criterion(values, family, &space.center(), w)?;
    optimize(space, net_delta, refine_tol, Sense::Min, |t| w.quadratic(&sample_average(family, values, t)))
}

/// `diag(1 / Var f_k(Y_i, θ))` at `theta`; components with zero variance get weight 1.
pub fn inverse_variance_weighting(values: &[f64], family: &dyn FunctionFamily, theta: &[f64]) -> Result<WeightingScheme> {
    let m = family.output_dim();
    let mut cols = vec![Vec::with_capacity(values.len()); m];
    let mut buf = vec![0.0; m];
    for &y in values {
        family.eval_into(y, theta, &mut buf);
        for (c, b) in cols.iter_mut().zip(&buf) {
            c.push(*b);
        }
    }
    let diag: Vec<f64> = cols
        .iter()
        .map(|c| {
            let v = if c.len() > 1 { crate::stats::variance(c) } else { 0.0 };
            if v > 0.0 {
                1.0 / v
            } else {
                1.0
            }
        })
        .collect();
    WeightingScheme::diagonal(&diag)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::funcspace::{ClippedLocationMoments, ClippedQuadratic, ConstantFamily, Scaled};

    #[test]
    fn m_criterion_examples() {
        let c = ConstantFamily::new(0.25);
        assert_eq!(m_criterion(&[1.0, 2.0, 3.0, 4.0], &c, &[0.0]).unwrap(), 0.25);
        // f = 0.2 and 0.4 via a quadratic around θ = 0
        let q = ClippedQuadratic::new(4.0);
        let v = m_criterion(&[0.2f64.sqrt(), 0.4f64.sqrt()], &q, &[0.0]).unwrap();
        assert!((v - 0.3).abs() < 1e-15);
        assert!(m_criterion(&[0.0], &ClippedLocationMoments::new(vec![1.0, 2.0]), &[0.0]).is_err());
    }

    #[derive(Debug)]
    struct Fixed(Vec<f64>);

    impl FunctionFamily for Fixed {
        fn param_dim(&self) -> usize {
            1
        }
        fn output_dim(&self) -> usize {
            self.0.len()
        }
        fn eval_into(&self, _y: f64, _t: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&self.0);
        }
        fn certificate(&self) -> Option<crate::funcspace::BoundCertificate> {
            None
        }
    }

    #[test]
    fn gmm_criterion_examples() {
        let w = WeightingScheme::diagonal(&[1.0, 2.0]).unwrap();
        let v = gmm_criterion(&[7.0], &Fixed(vec![0.1, -0.2]), &[0.0], &w).unwrap();
        assert!((v - 0.09).abs() < 1e-15);
        let one = WeightingScheme::identity(1);
        assert_eq!(gmm_criterion(&[1.0, 2.0], &Fixed(vec![0.5]), &[0.0], &one).unwrap(), 0.25);
        let f1 = ClippedLocationMoments::new(vec![2.0]);
        assert_eq!(gmm_criterion(&[0.5, -0.5], &f1, &[0.0], &one).unwrap(), 0.0);
        assert!(gmm_criterion(&[0.5], &f1, &[0.0], &w).is_err());
    }

    #[test]
    fn weighting_validation() {
        assert!(WeightingScheme::diagonal(&[1.0, -1.0]).is_err());
        assert!(WeightingScheme::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0])).is_err());
        assert!(WeightingScheme::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).is_ok());
        assert!(WeightingScheme::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn m_estimate_interior_and_boundary() {
        let space = ParamSpace::interval(-1.0, 1.0).unwrap();
        let loss = Scaled::new(Arc::new(ClippedQuadratic::new(100.0)), -1.0);
        let ys = [0.1, 0.5, -0.3, 0.77, 0.2];
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let r = m_estimate(&ys, &loss, &space, 0.2, 1e-8).unwrap();
        assert!((r.theta_hat[0] - mean).abs() <= 1e-8, "{r:?}");
        let hi = [3.0, 4.0, 5.0];
        let r = m_estimate(&hi, &loss, &space, 0.2, 1e-8).unwrap();
        assert!((r.theta_hat[0] - 1.0).abs() <= 1e-8);
        assert!(m_estimate(&hi, &loss, &space, 0.2, 0.0).is_err());
    }

    #[test]
    fn constant_criterion_returns_first_net_point() {
        let space = ParamSpace::interval(-1.0, 1.0).unwrap();
        let r = m_estimate(&[0.3, 0.1], &ConstantFamily::new(1.0), &space, 0.1, 1e-6).unwrap();
        assert_eq!(r.net_stage.index, 0);
        assert_eq!(r.theta_hat, vec![-1.0]);
        let g = gmm_estimate(&[0.3], &ConstantFamily::new(0.5), &space, &WeightingScheme::identity(1), 0.1, 1e-6).unwrap();
        assert_eq!(g.theta_hat, vec![-1.0]);
    }

    #[test]
    fn gmm_exact_zero_at_net_point() {
        let space = ParamSpace::interval(-1.0, 1.0).unwrap();
        let f = ClippedLocationMoments::new(vec![0.5, 1.5]);
        // symmetric around 0.5, a net point for δ = 0.25
        let ys = [0.25, 0.75, 0.0, 1.0];
        let r = gmm_estimate(&ys, &f, &space, &WeightingScheme::identity(2), 0.25, 1e-8).unwrap();
        assert_eq!(r.theta_hat, vec![0.5]);
        assert_eq!(r.criterion_value, 0.0);
    }

    #[test]
    fn two_dimensional_compass() {
        #[derive(Debug)]
        struct Bowl;
        impl FunctionFamily for Bowl {
            fn param_dim(&self) -> usize {
                2
            }
            fn output_dim(&self) -> usize {
                1
            }
            fn eval_into(&self, y: f64, t: &[f64], out: &mut [f64]) {
                out[0] = -((t[0] - y).powi(2) + (t[1] + 0.5 * y).powi(2));
            }
            fn certificate(&self) -> Option<crate::funcspace::BoundCertificate> {
                None
            }
        }
        let space = ParamSpace::new(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let r = m_estimate(&[0.3, 0.5], &Bowl, &space, 0.3, 1e-7).unwrap();
        assert!((r.theta_hat[0] - 0.4).abs() < 1e-6 && (r.theta_hat[1] + 0.2).abs() < 1e-6, "{r:?}");
    }
}
