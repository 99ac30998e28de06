//! Discrete laws on the grid `{k h : k ∈ Z}` and their convolutions.
//!
//! Continuous parts are binned into cells centred on grid points; atoms are
//! split between the two neighbouring grid points so that the mean is kept.

use statrs::function::erf::erfc;

use super::BoundedLaw;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Lattice {
    /// Grid index of `mass[0]`.
    pub start: i64,
    pub h: f64,
    pub mass: Vec<f64>,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

impl Lattice {
    pub fn point(h: f64) -> Self {
        Self { start: 0, h, mass: vec![1.0] }
    }

    pub fn at(&self, k: usize) -> f64 {
        (self.start + k as i64) as f64 * self.h
    }

    fn add_atom(&mut self, x: f64, p: f64) {
        let t = x / self.h;
        let k = t.floor();
        let frac = t - k;
        let i = k as i64 - self.start;
        self.mass[i as usize] += p * (1.0 - frac);
        if frac > 0.0 {
            self.mass[i as usize + 1] += p * frac;
        }
    }

    /// Law of `scale · X` for `X ~ law`.
    pub fn discretize(law: &BoundedLaw, scale: f64, h: f64) -> Self {
        let s = scale.abs();
        let bound = law.bound() * s;
        if bound == 0.0 {
            return Self::point(h);
        }
        let half = (bound / h).ceil() as i64 + 1;
        let mut out = Self { start: -half, h, mass: vec![0.0; (2 * half + 1) as usize] };
        // probability that scale·X lies in [a, b] for the continuous part
        let cell = |a: f64, b: f64| -> f64 {
            match *law {
                BoundedLaw::Uniform { .. } => (b.min(bound) - a.max(-bound)).max(0.0) / (2.0 * bound),
                BoundedLaw::ClippedGaussian { sd, .. } => {
                    let (a, b) = (a.max(-bound), b.min(bound));
                    if b <= a || sd == 0.0 {
                        0.0
                    } else {
                        normal_cdf(b / (sd * s)) - normal_cdf(a / (sd * s))
                    }
                }
                BoundedLaw::Rademacher => 0.0,
            }
        };
        for (k, m) in out.mass.iter_mut().enumerate() {
            let x = (k as i64 - half) as f64 * h;
            *m = cell(x - 0.5 * h, x + 0.5 * h);
        }
        match *law {
            BoundedLaw::Rademacher => {
                out.add_atom(-s, 0.5);
                out.add_atom(s, 0.5);
            }
            BoundedLaw::ClippedGaussian { sd, .. } => {
                let tail = if sd == 0.0 { 0.0 } else { normal_cdf(-bound / (sd * s)) };
                out.add_atom(-bound, tail);
                out.add_atom(bound, tail);
                if sd == 0.0 {
                    out.add_atom(0.0, 1.0);
                }
            }
            BoundedLaw::Uniform { .. } => {}
        }
        out
    }

    pub fn convolve(&self, other: &Self) -> Self {
        let mut mass = vec![0.0; self.mass.len() + other.mass.len() - 1];
        for (i, a) in self.mass.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.mass.iter().enumerate() {
                mass[i + j] += a * b;
            }
        }
        Self { start: self.start + other.start, h: self.h, mass }.trimmed()
    }

    fn trimmed(mut self) -> Self {
        let lead = self.mass.iter().take_while(|m| **m == 0.0).count();
        if lead == self.mass.len() {
            return Self::point(self.h);
        }
        let trail = self.mass.iter().rev().take_while(|m| **m == 0.0).count();
        self.mass.truncate(self.mass.len() - trail);
        self.mass.drain(..lead);
        self.start += lead as i64;
        self
    }

    #[cfg(test)]
    pub fn lo(&self) -> f64 {
        self.at(0)
    }

    #[cfg(test)]
    pub fn hi(&self) -> f64 {
        self.at(self.mass.len() - 1)
    }

    #[cfg(test)]
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (k, m) in self.mass.iter().enumerate() {
            if *m != 0.0 {
                acc += m * g(self.at(k));
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masses_sum_to_one_and_are_symmetric() {
        for law in [
            BoundedLaw::Uniform { bound: 1.0 },
            BoundedLaw::ClippedGaussian { sd: 0.7, bound: 1.2 },
            BoundedLaw::Rademacher,
        ] {
            let l = Lattice::discretize(&law, 0.37, 1e-3);
            assert!((l.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{law:?}");
            assert!(l.expect(|x| x).abs() < 1e-12, "{law:?}");
        }
    }

    #[test]
    fn uniform_variance_close_to_exact() {
        let l = Lattice::discretize(&BoundedLaw::Uniform { bound: 1.0 }, 1.0, 1e-3);
        assert!((l.expect(|x| x * x) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn convolution_adds_variances() {
        let h = 1e-3;
        let a = Lattice::discretize(&BoundedLaw::Uniform { bound: 1.0 }, 1.0, h);
        let b = Lattice::discretize(&BoundedLaw::Rademacher, 0.5, h);
        let c = a.convolve(&b);
        assert!((c.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((c.expect(|x| x * x) - (1.0 / 3.0 + 0.25)).abs() < 1e-6);
        assert!(c.lo() >= -1.5 - 2.0 * h && c.hi() <= 1.5 + 2.0 * h);
    }
}
