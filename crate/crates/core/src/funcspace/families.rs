use std::sync::Arc;

use super::{BoundCertificate, CertificateKind, FunctionFamily, LocationKernel};

/// `f(y, θ) = min{(y - θ)², cap}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedQuadratic {
    cap: f64,
}

impl ClippedQuadratic {
    pub fn new(cap: f64) -> Self {
        assert!(cap > 0.0 && cap.is_finite(), "cap must be positive");
        Self { cap }
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

impl LocationKernel for ClippedQuadratic {
    fn output_dim(&self) -> usize {
        1
    }

    fn kernel_into(&self, z: f64, out: &mut [f64]) {
        out[0] = (z * z).min(self.cap);
    }
}

impl FunctionFamily for ClippedQuadratic {
    fn param_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval_into(&self, y: f64, theta: &[f64], out: &mut [f64]) {
        self.kernel_into(y - theta[0], out);
    }

    fn certificate(&self) -> Option<BoundCertificate> {
        // slope 2|z| on |z| <= √cap, flat beyond
        let lip = 2.0 * self.cap.sqrt();
        Some(BoundCertificate { sup: self.cap, lip_y: lip, lip_theta: lip, kind: CertificateKind::Analytic })
    }

    fn location_kernel(&self) -> Option<&dyn LocationKernel> {
        Some(self)
    }
}

/// `f_k(y, θ) = clamp(y - θ, -c_k, c_k)` for each clip level `c_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedLocationMoments {
    clips: Vec<f64>,
}

impl ClippedLocationMoments {
    pub fn new(clips: Vec<f64>) -> Self {
        assert!(!clips.is_empty(), "need at least one moment");
        assert!(clips.iter().all(|c| *c > 0.0 && c.is_finite()), "clip levels must be positive");
        Self { clips }
    }

    pub fn clips(&self) -> &[f64] {
        &self.clips
    }
}

impl LocationKernel for ClippedLocationMoments {
    fn output_dim(&self) -> usize {
        self.clips.len()
    }

    fn kernel_into(&self, z: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.clips) {
            *o = z.clamp(-c, *c);
        }
    }
}

impl FunctionFamily for ClippedLocationMoments {
    fn param_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        self.clips.len()
    }

    fn eval_into(&self, y: f64, theta: &[f64], out: &mut [f64]) {
        self.kernel_into(y - theta[0], out);
    }

    fn certificate(&self) -> Option<BoundCertificate> {
        let sup = self.clips.iter().copied().fold(0.0, f64::max);
        Some(BoundCertificate { sup, lip_y: 1.0, lip_theta: 1.0, kind: CertificateKind::Analytic })
    }

    fn location_kernel(&self) -> Option<&dyn LocationKernel> {
        Some(self)
    }
}

/// `f(y, θ) = value`, with an optional looser certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFamily {
    value: f64,
    param_dim: usize,
    certificate: BoundCertificate,
}

impl ConstantFamily {
    pub fn new(value: f64) -> Self {
        Self::with_param_dim(value, 1)
    }

    pub fn with_param_dim(value: f64, param_dim: usize) -> Self {
        let certificate = BoundCertificate { sup: value.abs(), lip_y: 0.0, lip_theta: 0.0, kind: CertificateKind::Analytic };
        Self { value, param_dim, certificate }
    }

    /// Constant `value` certified with `R = sup`, `L = L̄ = lip`.
    pub fn with_certificate(value: f64, sup: f64, lip: f64) -> Self {
        let certificate = BoundCertificate { sup, lip_y: lip, lip_theta: lip, kind: CertificateKind::Analytic };
        Self { value, param_dim: 1, certificate }
    }
}

impl LocationKernel for ConstantFamily {
    fn output_dim(&self) -> usize {
        1
    }

    fn kernel_into(&self, _z: f64, out: &mut [f64]) {
        out[0] = self.value;
    }
}

impl FunctionFamily for ConstantFamily {
    fn param_dim(&self) -> usize {
        self.param_dim
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval_into(&self, _y: f64, _theta: &[f64], out: &mut [f64]) {
        out[0] = self.value;
    }

    fn certificate(&self) -> Option<BoundCertificate> {
        Some(self.certificate)
    }

    fn location_kernel(&self) -> Option<&dyn LocationKernel> {
        Some(self)
    }
}

/// `factor · inner`.
#[derive(Debug, Clone)]
pub struct Scaled {
    inner: Arc<dyn FunctionFamily>,
    factor: f64,
}

impl Scaled {
    pub fn new(inner: Arc<dyn FunctionFamily>, factor: f64) -> Self {
        assert!(factor.is_finite(), "factor must be finite");
        Self { inner, factor }
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

impl LocationKernel for Scaled {
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn kernel_into(&self, z: f64, out: &mut [f64]) {
        let k = self.inner.location_kernel().expect("scaled kernel without inner kernel");
        k.kernel_into(z, out);
        out.iter_mut().for_each(|o| *o *= self.factor);
    }
}

impl FunctionFamily for Scaled {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn eval_into(&self, y: f64, theta: &[f64], out: &mut [f64]) {
        self.inner.eval_into(y, theta, out);
        out.iter_mut().for_each(|o| *o *= self.factor);
    }

    fn certificate(&self) -> Option<BoundCertificate> {
        let a = self.factor.abs();
        self.inner.certificate().map(|c| BoundCertificate {
            sup: a * c.sup,
            lip_y: a * c.lip_y,
            lip_theta: a * c.lip_theta,
            kind: c.kind,
        })
    }

    fn location_kernel(&self) -> Option<&dyn LocationKernel> {
        self.inner.location_kernel().map(|_| self as &dyn LocationKernel)
    }
}

/// `inner` with its certificate replaced (used to plant understated bounds).
#[derive(Debug, Clone)]
pub struct WithCertificate {
    inner: Arc<dyn FunctionFamily>,
    certificate: Option<BoundCertificate>,
}

impl WithCertificate {
    pub fn new(inner: Arc<dyn FunctionFamily>, certificate: Option<BoundCertificate>) -> Self {
        Self { inner, certificate }
    }
}

impl FunctionFamily for WithCertificate {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn eval_into(&self, y: f64, theta: &[f64], out: &mut [f64]) {
        self.inner.eval_into(y, theta, out);
    }

    fn certificate(&self) -> Option<BoundCertificate> {
        self.certificate
    }

    fn location_kernel(&self) -> Option<&dyn LocationKernel> {
        self.inner.location_kernel()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clipped_quadratic_values() {
        let f = ClippedQuadratic::new(4.0);
        assert_eq!(f.eval(1.5, &[0.5]), 1.0);
        assert_eq!(f.eval(5.0, &[0.0]), 4.0);
        assert_eq!(f.certificate().unwrap().lip_y, 4.0);
    }

    #[test]
    fn clipped_moments_values() {
        let f = ClippedLocationMoments::new(vec![0.5, 1.5]);
        let mut out = [0.0; 2];
        f.eval_into(1.0, &[0.0], &mut out);
        assert_eq!(out, [0.5, 1.0]);
        f.eval_into(-3.0, &[0.0], &mut out);
        assert_eq!(out, [-0.5, -1.5]);
    }

    #[test]
    fn scaled_family_and_kernel_agree() {
        let f = Scaled::new(Arc::new(ClippedQuadratic::new(4.0)), -1.0);
        assert_eq!(f.eval(1.0, &[0.0]), -1.0);
        let mut out = [0.0];
        f.location_kernel().unwrap().kernel_into(1.0, &mut out);
        assert_eq!(out[0], -1.0);
        assert_eq!(f.certificate().unwrap().sup, 4.0);
    }
}
