//! Conditionally dependent arrays on a network.
//!
//! Every built-in process has the form
//!
//! ```text
//! Y_i = location + ρ₀ · C_i + Σ_{j : d(i,j) ≤ r} w(d(i,j)) · ε_j
//! ```
//!
//! with bounded i.i.d. innovations `ε` and a bounded shock `C` that is either
//! shared by all nodes (`Global`) or drawn per node (`Nodal`). Conditional on
//! the shock, nodes more than `2r` apart use disjoint innovations.

mod decay;
mod lattice;
mod oracle;

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::funcspace::FunctionFamily;
use crate::netgraph::{BfsScratch, Distance, Network, NodeId};
use crate::rng::{Stream, StreamRng};
use crate::stats;

pub use decay::{theoretical_decay, DecayProfile, PowerBoundCheck};
pub use oracle::{
    conditional_mean_oracle, unconditional_mean_oracle, MeanOracle, MonteCarloOracle, OracleMethod, OracleMode,
    OracleValue, TabulatedOracle,
};

/// Bounded scalar distributions for innovations and shocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law", deny_unknown_fields)]
pub enum BoundedLaw {
    /// Uniform on `[-bound, bound]`.
    Uniform { bound: f64 },
    /// `clamp(N(0, sd²), -bound, bound)`.
    ClippedGaussian { sd: f64, bound: f64 },
    /// `±1` with equal probability.
    Rademacher,
}

impl BoundedLaw {
    pub fn bound(&self) -> f64 {
        match *self {
            Self::Uniform { bound } | Self::ClippedGaussian { bound, .. } => bound,
            Self::Rademacher => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Uniform { bound } if !(bound >= 0.0 && bound.is_finite()) => {
                invalid(format!("uniform bound must be finite and >= 0, got {bound}"))
            }
            Self::ClippedGaussian { sd, bound } if !(sd >= 0.0 && bound >= 0.0 && bound.is_finite() && sd.is_finite()) => {
                invalid(format!("clipped gaussian needs finite sd, bound >= 0 (got {sd}, {bound})"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { bound } => bound * (2.0 * rng.random::<f64>() - 1.0),
            Self::ClippedGaussian { sd, bound } => {
                let z: f64 = rng.sample(StandardNormal);
                (sd * z).clamp(-bound, bound)
            }
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShockScope {
    /// One scalar shock shared by every node.
    Global,
    /// An independent shock per node (node-level latent heterogeneity).
    #[default]
    Nodal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProcessKind {
    /// Moving average with explicit weights `w(0), …, w(r)`.
    NetworkMa { weights: Vec<f64> },
    /// `w(s) = ρ^s`, cut at `truncation` hops. `None` is the untruncated
    /// ideal, which can be described but not simulated.
    GeometricWeights { rho: f64, truncation: Option<usize> },
}

/// Serialized flat, with the kind's fields next to the common ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProcessRepr", into = "ProcessRepr")]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub location: f64,
    pub shock_loading: f64,
    pub shock_scope: ShockScope,
    pub innovation: BoundedLaw,
    pub shock: BoundedLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    NetworkMa,
    GeometricWeights,
}

// flatten and deny_unknown_fields do not combine in serde, hence this mirror
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessRepr {
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<usize>,
    #[serde(default)]
    location: f64,
    #[serde(default)]
    shock_loading: f64,
    #[serde(default)]
    shock_scope: ShockScope,
    innovation: BoundedLaw,
    shock: BoundedLaw,
}

impl TryFrom<ProcessRepr> for ProcessSpec {
    type Error = String;

    fn try_from(r: ProcessRepr) -> std::result::Result<Self, String> {
        let kind = match (r.kind, r.weights, r.rho) {
            (KindTag::NetworkMa, Some(weights), None) if r.truncation.is_none() => ProcessKind::NetworkMa { weights },
            (KindTag::NetworkMa, ..) => return Err("network_ma takes `weights` and no `rho` or `truncation`".into()),
            (KindTag::GeometricWeights, None, Some(rho)) => {
                ProcessKind::GeometricWeights { rho, truncation: r.truncation }
            }
            (KindTag::GeometricWeights, ..) => {
                return Err("geometric_weights takes `rho`, optional `truncation` and no `weights`".into())
            }
        };
        Ok(Self {
            kind,
            location: r.location,
            shock_loading: r.shock_loading,
            shock_scope: r.shock_scope,
            innovation: r.innovation,
            shock: r.shock,
        })
    }
}

impl From<ProcessSpec> for ProcessRepr {
    fn from(s: ProcessSpec) -> Self {
        let (kind, weights, rho, truncation) = match s.kind {
            ProcessKind::NetworkMa { weights } => (KindTag::NetworkMa, Some(weights), None, None),
            ProcessKind::GeometricWeights { rho, truncation } => (KindTag::GeometricWeights, None, Some(rho), truncation),
        };
        Self {
            kind,
            weights,
            rho,
            truncation,
            location: s.location,
            shock_loading: s.shock_loading,
            shock_scope: s.shock_scope,
            innovation: s.innovation,
            shock: s.shock,
        }
    }
}

impl ProcessSpec {
    /// Moving average of radius `weights.len() - 1`, uniform innovations on
    /// `[-1, 1]`, uniform nodal shocks on `[-1, 1]`.
    pub fn moving_average(weights: Vec<f64>, shock_loading: f64) -> Self {
        Self {
            kind: ProcessKind::NetworkMa { weights },
            location: 0.0,
            shock_loading,
            shock_scope: ShockScope::Nodal,
            innovation: BoundedLaw::Uniform { bound: 1.0 },
            shock: BoundedLaw::Uniform { bound: 1.0 },
        }
    }

    pub fn radius(&self) -> Result<usize> {
        match &self.kind {
            ProcessKind::NetworkMa { weights } if weights.is_empty() => invalid("moving average needs at least w(0)"),
            ProcessKind::NetworkMa { weights } => Ok(weights.len() - 1),
            ProcessKind::GeometricWeights { truncation: Some(r), .. } => Ok(*r),
            ProcessKind::GeometricWeights { truncation: None, .. } => {
                invalid("untruncated geometric weights have no finite radius")
            }
        }
    }

    /// `w(0..=r)`.
    pub fn weights(&self) -> Result<Vec<f64>> {
        let r = self.radius()?;
        Ok(match &self.kind {
            ProcessKind::NetworkMa { weights } => weights.clone(),
            ProcessKind::GeometricWeights { rho, .. } => (0..=r).map(|s| rho.powi(s as i32)).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights()?;
        if w.iter().any(|v| !v.is_finite()) {
            return invalid("weights must be finite");
        }
        if let ProcessKind::GeometricWeights { rho, .. } = self.kind {
            if !(rho.abs() < 1.0) {
                return invalid(format!("geometric weights need |rho| < 1, got {rho}"));
            }
        }
        if !(self.location.is_finite() && self.shock_loading.is_finite()) {
            return invalid("location and shock loading must be finite");
        }
        self.innovation.validate()?;
        self.shock.validate()
    }
}

/// One realization of the array together with the shock it was drawn under.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub values: Vec<f64>,
    /// One entry for a global shock, `n` entries for nodal shocks.
    pub common_shock: Vec<f64>,
    /// Stream that produced the shock.
    pub shock_stream: Stream,
    /// Stream that produced the innovations.
    pub innovation_stream: Stream,
}

impl SampleDraw {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn shock_at(&self, i: NodeId) -> f64 {
        if self.common_shock.len() == 1 {
            self.common_shock[0]
        } else {
            self.common_shock[i]
        }
    }

    /// CSV with columns `node_id,value,shock` (1-based ids).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "node_id,value,shock")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, v, self.shock_at(i))?;
        }
        Ok(())
    }
}

/// A process bound to a network, with every node's `r`-ball precomputed.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    net: &'a Network,
    spec: ProcessSpec,
    radius: usize,
    weights: Vec<f64>,
    offsets: Vec<usize>,
    /// `(j, d(i, j))` for every `j` in the ball of `i`, BFS order.
    ball: Vec<(NodeId, Distance)>,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a Network, spec: &ProcessSpec) -> Result<Self> {
        spec.validate()?;
        let radius = spec.radius()?;
        let weights = spec.weights()?;
        let mut offsets = Vec::with_capacity(net.n() + 1);
        let mut ball = Vec::new();
        let mut scratch = BfsScratch::new();
        offsets.push(0);
        for i in 0..net.n() {
            ball.extend(net.ball(i, radius as Distance, &mut scratch));
            offsets.push(ball.len());
        }
        Ok(Self { net, spec: spec.clone(), radius, weights, offsets, ball })
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.net.n()
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ball(&self, i: NodeId) -> &[(NodeId, Distance)] {
        &self.ball[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Number of nodes at each distance `0..=r` from `i`.
    pub fn shell_signature(&self, i: NodeId) -> Vec<usize> {
        let mut sig = vec![0; self.radius + 1];
        for &(_, d) in self.ball(i) {
            sig[d as usize] += 1;
        }
        sig
    }

    pub fn draw_shock<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let len = match self.spec.shock_scope {
            ShockScope::Global => 1,
            ShockScope::Nodal => self.n(),
        };
        (0..len).map(|_| self.spec.shock.sample(rng)).collect()
    }

    pub fn draw_innovations<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n()).map(|_| self.spec.innovation.sample(rng)).collect()
    }

    /// `Σ_{j in ball(i)} w(d(i,j)) ε_j`, accumulated in BFS order.
    pub fn innovation_part(&self, i: NodeId, innovations: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &(j, d) in self.ball(i) {
            acc += self.weights[d as usize] * innovations[j];
        }
        acc
    }

    /// `E[Y_i | C] = location + ρ₀ C_i` (innovations are symmetric, mean zero).
    pub fn conditional_location(&self, i: NodeId, shock: &[f64]) -> f64 {
        let c = if shock.len() == 1 { shock[0] } else { shock[i] };
        self.spec.location + self.spec.shock_loading * c
    }

    pub fn assemble(&self, shock: &[f64], innovations: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.conditional_location(i, shock) + self.innovation_part(i, innovations))
            .collect()
    }

    /// Draw shock and innovations from sub-streams `shock` and `innovations`.
    pub fn draw(&self, stream: Stream) -> SampleDraw {
        let shock_stream = stream.stage("shock");
        let shock = self.draw_shock(&mut shock_stream.rng());
        self.draw_given_shock(shock, shock_stream, stream.stage("innovations"))
    }

    /// Fresh innovations from `innovation_stream` under a fixed shock.
    pub fn draw_given_shock(&self, shock: Vec<f64>, shock_stream: Stream, innovation_stream: Stream) -> SampleDraw {
        let eps = self.draw_innovations(&mut innovation_stream.rng());
        SampleDraw { values: self.assemble(&shock, &eps), common_shock: shock, shock_stream, innovation_stream }
    }

    /// `X_i = Y_i - E[Y_i | C]`, exactly conditionally centred and bounded.
    pub fn centered(&self, draw: &SampleDraw) -> Vec<f64> {
        draw.values
            .iter()
            .enumerate()
            .map(|(i, y)| y - self.conditional_location(i, &draw.common_shock))
            .collect()
    }

    /// Almost-sure bound on `|Y_i|` implied by the construction.
    pub fn value_bound(&self) -> f64 {
        let mut max_shell = vec![0usize; self.radius + 1];
        for i in 0..self.n() {
            for (m, s) in max_shell.iter_mut().zip(self.shell_signature(i)) {
                *m = (*m).max(s);
            }
        }
        let spread: f64 = self.weights.iter().zip(&max_shell).map(|(w, &m)| w.abs() * m as f64).sum();
        self.spec.location.abs() + self.spec.shock_loading.abs() * self.spec.shock.bound() + self.spec.innovation.bound() * spread
    }

    /// Sup bound on the centred innovation part `|X_i|`.
    pub fn centered_bound(&self) -> f64 {
        self.value_bound() - self.spec.location.abs() - self.spec.shock_loading.abs() * self.spec.shock.bound()
    }
}

/// One draw of `{Y_i}` with its shock, deterministic in `seed`.
pub fn simulate(net: &Network, spec: &ProcessSpec, seed: u64) -> Result<SampleDraw> {
    Ok(Simulator::new(net, spec)?.draw(Stream::root(seed)))
}

/// `C · a · b · (‖f‖∞ + Lip f)(‖g‖∞ + Lip g)`, using certified bounds.
pub fn psi_bound(f: &dyn FunctionFamily, g: &dyn FunctionFamily, a: usize, b: usize, c: f64) -> Result<f64> {
    let (Some(cf), Some(cg)) = (f.certificate(), g.certificate()) else {
        return invalid("psi bound needs bound certificates for both functions");
    };
    Ok(c * (a * b) as f64 * (cf.sup + cf.lip_y) * (cg.sup + cg.lip_y))
}

/// Covariance between `f(Y_i)` and `g(Y_j)` for one node pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCovariance {
    pub i: NodeId,
    pub j: NodeId,
    pub cov: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovDecayEstimate {
    pub distance: usize,
    /// Largest `|cov|` over the sampled pairs.
    pub estimate: f64,
    /// Standard error of the pair attaining `estimate`.
    pub se: f64,
    pub pairs: Vec<PairCovariance>,
}

impl CovDecayEstimate {
    /// `|estimate| < k · SE`; a zero estimate always passes.
    pub fn within(&self, k: f64) -> bool {
        self.estimate == 0.0 || self.estimate.abs() < k * self.se
    }
}

fn sample_pairs(net: &Network, s: usize, n_pairs: usize, rng: &mut StreamRng) -> Vec<(NodeId, NodeId)> {
    let n = net.n();
    let mut order: Vec<NodeId> = (0..n).collect();
    for k in (1..n).rev() {
        let j = rng.random_range(0..=k);
        order.swap(k, j);
    }
    let mut scratch = BfsScratch::new();
    let mut pairs = Vec::with_capacity(n_pairs);
    for &i in &order {
        if pairs.len() == n_pairs {
            break;
        }
        let at_s: Vec<NodeId> = net
            .ball(i, s as Distance, &mut scratch)
            .into_iter()
            .filter(|&(_, d)| d as usize == s)
            .map(|(j, _)| j)
            .collect();
        if !at_s.is_empty() {
            pairs.push((i, at_s[rng.random_range(0..at_s.len())]));
        }
    }
    pairs
}

/// Monte Carlo estimate of `max |Cov(f(Y_i), g(Y_j) | C)|` over sampled pairs
/// at distance exactly `s`. The shock comes from `stream/shock` and stays fixed
/// across the `n_reps` innovation draws.
pub fn empirical_cov_decay(
    sim: &Simulator<'_>,
    f: &(dyn Fn(f64) -> f64 + Sync),
    g: &(dyn Fn(f64) -> f64 + Sync),
    s: usize,
    n_pairs: usize,
    n_reps: usize,
    stream: Stream,
) -> Result<CovDecayEstimate> {
    if n_reps < 2 || n_pairs == 0 {
        return invalid("covariance estimate needs n_reps >= 2 and n_pairs >= 1");
    }
    let pairs = sample_pairs(sim.network(), s, n_pairs, &mut stream.stage("pairs").rng());
    if pairs.is_empty() {
        return Err(Error::InvalidArgument(format!("no node pair at distance {s}")));
    }
    let shock_stream = stream.stage("shock");
    let shock = sim.draw_shock(&mut shock_stream.rng());
    let mut a = vec![Vec::with_capacity(n_reps); pairs.len()];
    let mut b = vec![Vec::with_capacity(n_reps); pairs.len()];
    for rep in 0..n_reps {
        let eps = sim.draw_innovations(&mut stream.stage("reps").index(rep as u64).rng());
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let yi = sim.conditional_location(i, &shock) + sim.innovation_part(i, &eps);
            let yj = sim.conditional_location(j, &shock) + sim.innovation_part(j, &eps);
            a[k].push(f(yi));
            b[k].push(g(yj));
        }
    }
    let mut out = Vec::with_capacity(pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (ma, mb) = (stats::mean(&a[k]), stats::mean(&b[k]));
        let prods: Vec<f64> = a[k].iter().zip(&b[k]).map(|(x, y)| (x - ma) * (y - mb)).collect();
        let cov = prods.iter().sum::<f64>() / (n_reps - 1) as f64;
        let se = stats::std_error(&prods);
        out.push(PairCovariance { i, j, cov, se });
    }
    let top = out
        .iter()
        .copied()
        .reduce(|best, p| if p.cov.abs() > best.cov.abs() { p } else { best })
        .expect("nonempty");
    Ok(CovDecayEstimate { distance: s, estimate: top.cov.abs(), se: top.se, pairs: out })
}
