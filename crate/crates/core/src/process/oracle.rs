//! Conditional and unconditional mean oracles `E[f(Y_i, θ) | C]` and `E f(Y_i, θ)`.
//!
//! Location families `f(y, θ) = g(y - θ)` get an analytic path: the law of the
//! innovation part of `Y_i` depends only on how many nodes sit at each distance
//! `0..=r`, so one lattice convolution per shell signature gives
//! `φ(u) = E g(Z - u)` for every node of that class. Everything else falls
//! back to Monte Carlo with fresh innovations.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lattice::Lattice;
use super::{ShockScope, Simulator};
use crate::error::{invalid, Result};
use crate::funcspace::{CertificateKind, FunctionFamily, LocationKernel};
use crate::netgraph::NodeId;
use crate::rng::Stream;

/// Target grid size for the innovation-part lattice.
const LATTICE_POINTS: f64 = 4000.0;
const MIN_SPACING: f64 = 1e-4;
/// Interpolation nodes for the tabulated `φ`.
const TABLE_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Shock held at its realized value.
    Conditional,
    /// Shock integrated out.
    Unconditional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleValue {
    /// One entry per family output.
    pub mean: Vec<f64>,
    /// Monte Carlo standard error (largest over outputs); 0 on the analytic path.
    pub se: f64,
    pub method: OracleMethod,
}

/// Node-averaged means `(1/n) Σ_i E[f(Y_i, θ) | ·]` at a batch of parameters.
pub trait MeanOracle: Sync {
    fn mode(&self) -> OracleMode;
    fn method(&self) -> OracleMethod;
    /// `shock` is ignored in unconditional mode. `stream` feeds Monte Carlo
    /// oracles and is ignored by analytic ones.
    fn node_average(&self, shock: &[f64], points: &[Vec<f64>], stream: Stream) -> Result<Vec<OracleValue>>;
}

/// `f` is certified constant in `y`, so its mean is its value anywhere.
fn constant_in_y(family: &dyn FunctionFamily) -> bool {
    matches!(family.certificate(), Some(c) if c.kind == CertificateKind::Analytic && c.lip_y == 0.0)
}

fn eval_at(family: &dyn FunctionFamily, y: f64, theta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; family.output_dim()];
    family.eval_into(y, theta, &mut out);
    out
}

fn shock_of(shock: &[f64], i: NodeId) -> f64 {
    if shock.len() == 1 {
        shock[0]
    } else {
        shock[i]
    }
}

fn check_shock(sim: &Simulator<'_>, shock: &[f64]) -> Result<()> {
    let ok = match sim.spec().shock_scope {
        ShockScope::Global => shock.len() == 1,
        ShockScope::Nodal => shock.len() == sim.n(),
    };
    if !ok {
        return invalid(format!("shock has length {} but the process expects {:?} scope", shock.len(), sim.spec().shock_scope));
    }
    let b = sim.spec().shock.bound();
    if shock.iter().any(|c| !(c.abs() <= b)) {
        return invalid("shock value outside the support of the shock law");
    }
    Ok(())
}

fn lattice_spacing(sim: &Simulator<'_>, signatures: &[Vec<usize>], with_shock: bool) -> f64 {
    let spec = sim.spec();
    let spread = signatures
        .iter()
        .map(|sig| sig.iter().zip(sim.weights()).map(|(&c, w)| c as f64 * w.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * spec.innovation.bound();
    let shock = if with_shock { spec.shock_loading.abs() * spec.shock.bound() } else { 0.0 };
    (2.0 * (spread + shock) / LATTICE_POINTS).max(MIN_SPACING)
}

/// Law of the innovation part for a shell signature, optionally with `ρ₀ C` added.
fn class_lattice(sim: &Simulator<'_>, signature: &[usize], h: f64, with_shock: bool) -> Lattice {
    let spec = sim.spec();
    let mut acc = Lattice::point(h);
    for (d, &count) in signature.iter().enumerate() {
        let w = sim.weights()[d];
        if w == 0.0 || count == 0 {
            continue;
        }
        let piece = Lattice::discretize(&spec.innovation, w, h);
        for _ in 0..count {
            acc = acc.convolve(&piece);
        }
    }
    if with_shock && spec.shock_loading != 0.0 {
        acc = acc.convolve(&Lattice::discretize(&spec.shock, spec.shock_loading, h));
    }
    acc
}

fn kernel_mean(law: &Lattice, kernel: &dyn LocationKernel, u: f64, out: &mut [f64]) {
    let m = out.len();
    let mut buf = vec![0.0; m];
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut total = 0.0;
    for (k, p) in law.mass.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        kernel.kernel_into(law.at(k) - u, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += p * b;
        }
        total += p;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

fn location_kernel(family: &dyn FunctionFamily) -> Option<&dyn LocationKernel> {
    if family.param_dim() != 1 {
        return None;
    }
    family.location_kernel()
}

/// Analytic oracle for location families, tabulated over the parameter range.
pub struct TabulatedOracle<'a> {
    sim: &'a Simulator<'a>,
    family: &'a dyn FunctionFamily,
    mode: OracleMode,
    node_class: Vec<usize>,
    /// `tables[class][k][t]` is `φ_k` at `u_lo + t du`.
    tables: Vec<Vec<Vec<f64>>>,
    u_lo: f64,
    du: f64,
    spacing: f64,
    constant: bool,
}

impl<'a> TabulatedOracle<'a> {
    /// Tabulate for every `θ` in `[theta_lo, theta_hi]`.
    pub fn new(
        sim: &'a Simulator<'a>,
        family: &'a dyn FunctionFamily,
        mode: OracleMode,
        theta_lo: f64,
        theta_hi: f64,
    ) -> Result<Self> {
        let Some(kernel) = location_kernel(family) else {
            return invalid("analytic oracle needs a one-parameter location family");
        };
        if !(theta_lo <= theta_hi) {
            return invalid("empty parameter range");
        }
        let spec = sim.spec();
        let mut class_of: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut signatures = Vec::new();
        let node_class: Vec<usize> = (0..sim.n())
            .map(|i| {
                let sig = sim.shell_signature(i);
                *class_of.entry(sig.clone()).or_insert_with(|| {
                    signatures.push(sig);
                    signatures.len() - 1
                })
            })
            .collect();

        let with_shock = mode == OracleMode::Unconditional;
        let shift = match mode {
            OracleMode::Conditional => spec.shock_loading.abs() * spec.shock.bound(),
            OracleMode::Unconditional => 0.0,
        };
        let u_lo = theta_lo - spec.location - shift;
        let u_hi = theta_hi - spec.location + shift;
        let du = (u_hi - u_lo) / (TABLE_POINTS - 1) as f64;
        let points = if du > 0.0 { TABLE_POINTS } else { 1 };
        let h = lattice_spacing(sim, &signatures, with_shock);
        let m = kernel.output_dim();

        let tables = signatures
            .iter()
            .map(|sig| {
                let law = class_lattice(sim, sig, h, with_shock);
                let rows: Vec<Vec<f64>> = (0..points)
                    .into_par_iter()
                    .map(|t| {
                        let mut out = vec![0.0; m];
                        kernel_mean(&law, kernel, u_lo + t as f64 * du, &mut out);
                        out
                    })
                    .collect();
                (0..m).map(|k| rows.iter().map(|r| r[k]).collect()).collect()
            })
            .collect();
        Ok(Self { sim, family, mode, node_class, tables, u_lo, du, spacing: h, constant: constant_in_y(family) })
    }

    /// Lattice spacing used for the innovation law.
    pub fn resolution(&self) -> f64 {
        self.spacing
    }

    pub fn class_count(&self) -> usize {
        self.tables.len()
    }

    fn interp(&self, table: &[f64], u: f64) -> f64 {
        if table.len() == 1 {
            return table[0];
        }
        let t = ((u - self.u_lo) / self.du).clamp(0.0, (table.len() - 1) as f64);
        let k = (t.floor() as usize).min(table.len() - 2);
        let frac = t - k as f64;
        table[k] + frac * (table[k + 1] - table[k])
    }

    fn u(&self, i: NodeId, shock: &[f64], theta: f64) -> f64 {
        let spec = self.sim.spec();
        match self.mode {
            OracleMode::Conditional => theta - spec.location - spec.shock_loading * shock_of(shock, i),
            OracleMode::Unconditional => theta - spec.location,
        }
    }

    /// `E[f(Y_i, θ) | ·]` for one node.
    pub fn node_mean(&self, i: NodeId, shock: &[f64], theta: f64) -> Vec<f64> {
        if self.constant {
            return eval_at(self.family, 0.0, &[theta]);
        }
        let u = self.u(i, shock, theta);
        self.tables[self.node_class[i]].iter().map(|t| self.interp(t, u)).collect()
    }
}

impl MeanOracle for TabulatedOracle<'_> {
    fn mode(&self) -> OracleMode {
        self.mode
    }

    fn method(&self) -> OracleMethod {
        OracleMethod::Analytic
    }

    fn node_average(&self, shock: &[f64], points: &[Vec<f64>], _stream: Stream) -> Result<Vec<OracleValue>> {
        if self.mode == OracleMode::Conditional {
            check_shock(self.sim, shock)?;
        }
        let n = self.sim.n() as f64;
        let m = self.tables.first().map_or(0, Vec::len);
        points
            .iter()
            .map(|theta| {
                if theta.len() != 1 {
                    return invalid("analytic oracle takes one-dimensional parameters");
                }
                if self.constant {
                    let mean = eval_at(self.family, 0.0, theta);
                    return Ok(OracleValue { mean, se: 0.0, method: OracleMethod::Analytic });
                }
                let mut mean = vec![0.0; m];
                for i in 0..self.sim.n() {
                    let u = self.u(i, shock, theta[0]);
                    for (acc, t) in mean.iter_mut().zip(&self.tables[self.node_class[i]]) {
                        *acc += self.interp(t, u);
                    }
                }
                mean.iter_mut().for_each(|v| *v /= n);
                Ok(OracleValue { mean, se: 0.0, method: OracleMethod::Analytic })
            })
            .collect()
    }
}

/// Monte Carlo oracle with `n_mc` fresh neighbourhoods per node.
pub struct MonteCarloOracle<'a> {
    sim: &'a Simulator<'a>,
    family: &'a dyn FunctionFamily,
    mode: OracleMode,
    n_mc: usize,
}

impl<'a> MonteCarloOracle<'a> {
    pub fn new(sim: &'a Simulator<'a>, family: &'a dyn FunctionFamily, mode: OracleMode, n_mc: usize) -> Result<Self> {
        if n_mc < 2 {
            return invalid(format!("oracle needs n_mc >= 2, got {n_mc}"));
        }
        Ok(Self { sim, family, mode, n_mc })
    }

    pub fn draws(&self) -> usize {
        self.n_mc
    }

    /// Per-node sums and sums of squares of `f` at each point, laid out
    /// `[point][output]`.
    fn node_moments(&self, i: NodeId, shock: &[f64], points: &[Vec<f64>], stream: Stream) -> (Vec<f64>, Vec<f64>) {
        let spec = self.sim.spec();
        let m = self.family.output_dim();
        let mut rng = stream.rng();
        let ball = self.sim.ball(i);
        let mut sum = vec![0.0; points.len() * m];
        let mut sq = vec![0.0; points.len() * m];
        let mut buf = vec![0.0; m];
        for _ in 0..self.n_mc {
            let c = match self.mode {
                OracleMode::Conditional => shock_of(shock, i),
                OracleMode::Unconditional => spec.shock.sample(&mut rng),
            };
            let mut acc = 0.0;
            for &(_, d) in ball {
                acc += self.sim.weights()[d as usize] * spec.innovation.sample(&mut rng);
            }
            let y = spec.location + spec.shock_loading * c + acc;
            for (p, theta) in points.iter().enumerate() {
                self.family.eval_into(y, theta, &mut buf);
                for k in 0..m {
                    sum[p * m + k] += buf[k];
                    sq[p * m + k] += buf[k] * buf[k];
                }
            }
        }
        (sum, sq)
    }
}

impl MeanOracle for MonteCarloOracle<'_> {
    fn mode(&self) -> OracleMode {
        self.mode
    }

    fn method(&self) -> OracleMethod {
        OracleMethod::MonteCarlo
    }

    fn node_average(&self, shock: &[f64], points: &[Vec<f64>], stream: Stream) -> Result<Vec<OracleValue>> {
        if self.mode == OracleMode::Conditional {
            check_shock(self.sim, shock)?;
        }
        let m = self.family.output_dim();
        let k = self.n_mc as f64;
        let per_node: Vec<(Vec<f64>, Vec<f64>)> = (0..self.sim.n())
            .into_par_iter()
            .map(|i| self.node_moments(i, shock, points, stream.index(i as u64)))
            .collect();
        let n = self.sim.n() as f64;
        let mut out = Vec::with_capacity(points.len());
        for p in 0..points.len() {
            let mut mean = vec![0.0; m];
            let mut se: f64 = 0.0;
            for (c, acc) in mean.iter_mut().enumerate() {
                let mut var_sum = 0.0;
                for (sum, sq) in &per_node {
                    let mu = sum[p * m + c] / k;
                    *acc += mu;
                    var_sum += ((sq[p * m + c] - k * mu * mu) / (k - 1.0)).max(0.0);
                }
                *acc /= n;
                se = se.max((var_sum / k).sqrt() / n);
            }
            out.push(OracleValue { mean, se, method: OracleMethod::MonteCarlo });
        }
        Ok(out)
    }
}

fn single_node(
    sim: &Simulator<'_>,
    family: &dyn FunctionFamily,
    theta: &[f64],
    shock: &[f64],
    node: NodeId,
    n_mc: usize,
    stream: Stream,
    mode: OracleMode,
) -> Result<OracleValue> {
    if n_mc < 2 {
        return invalid(format!("oracle needs n_mc >= 2, got {n_mc}"));
    }
    if node >= sim.n() {
        return invalid(format!("node {node} out of range"));
    }
    if theta.len() != family.param_dim() {
        return invalid("parameter dimension does not match the family");
    }
    if constant_in_y(family) {
        return Ok(OracleValue { mean: eval_at(family, 0.0, theta), se: 0.0, method: OracleMethod::Analytic });
    }
    if let Some(kernel) = location_kernel(family) {
        let sig = sim.shell_signature(node);
        let with_shock = mode == OracleMode::Unconditional;
        let h = lattice_spacing(sim, std::slice::from_ref(&sig), with_shock);
        let law = class_lattice(sim, &sig, h, with_shock);
        let spec = sim.spec();
        let u = match mode {
            OracleMode::Conditional => theta[0] - spec.location - spec.shock_loading * shock_of(shock, node),
            OracleMode::Unconditional => theta[0] - spec.location,
        };
        let mut mean = vec![0.0; kernel.output_dim()];
        kernel_mean(&law, kernel, u, &mut mean);
        return Ok(OracleValue { mean, se: 0.0, method: OracleMethod::Analytic });
    }
    let mc = MonteCarloOracle::new(sim, family, mode, n_mc)?;
    let (sum, sq) = mc.node_moments(node, shock, &[theta.to_vec()], stream);
    let k = n_mc as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let se = sum
        .iter()
        .zip(&sq)
        .map(|(s, q)| {
            let mu = s / k;
            (((q - k * mu * mu) / (k - 1.0)).max(0.0) / k).sqrt()
        })
        .fold(0.0, f64::max);
    Ok(OracleValue { mean, se, method: OracleMethod::MonteCarlo })
}

/// `E[f(Y_node, θ) | C = shock]`. Location families are evaluated on the
/// lattice; other families by `n_mc` Monte Carlo draws from `stream`.
pub fn conditional_mean_oracle(
    sim: &Simulator<'_>,
    family: &dyn FunctionFamily,
    theta: &[f64],
    shock: &[f64],
    node: NodeId,
    n_mc: usize,
    stream: Stream,
) -> Result<OracleValue> {
    check_shock(sim, shock)?;
    single_node(sim, family, theta, shock, node, n_mc, stream, OracleMode::Conditional)
}

/// `E f(Y_node, θ)` with the shock integrated out.
pub fn unconditional_mean_oracle(
    sim: &Simulator<'_>,
    family: &dyn FunctionFamily,
    theta: &[f64],
    node: NodeId,
    n_mc: usize,
    stream: Stream,
) -> Result<OracleValue> {
    single_node(sim, family, theta, &[], node, n_mc, stream, OracleMode::Unconditional)
}
