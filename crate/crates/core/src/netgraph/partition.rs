//! Equal-size block partitions with a minimum in-block separation, and the
//! growth window that block sizes must respect.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BfsScratch, Distance, Network, NodeId, Topology, Visit, INFINITE};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    Singleton,
    Stride,
    Greedy,
}

/// Blocks `I_1..I_J` of identical size `b`. When `b` does not divide `n` the
/// leftover nodes sit in `tail`, outside every block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    pub blocks: Vec<Vec<NodeId>>,
    pub block_size: usize,
    /// Smallest distance between two distinct members of one block;
    /// [`INFINITE`] when no block has two members.
    pub separation: Distance,
    pub tail: Vec<NodeId>,
    pub method: PartitionMethod,
}

impl BlockPartition {
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn has_tail(&self) -> bool {
        !self.tail.is_empty()
    }

    /// `min in-block distance >= c * b`.
    pub fn is_separated(&self, c: f64) -> bool {
        self.block_size == 1 || f64::from(self.separation) >= c * self.block_size as f64
    }

    /// Block index for each node, `None` for tail nodes.
    pub fn membership(&self, n: usize) -> Vec<Option<usize>> {
        let mut m = vec![None; n];
        for (j, block) in self.blocks.iter().enumerate() {
            for &v in block {
                m[v] = Some(j);
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PartitionOutcome {
    Feasible(BlockPartition),
    /// No construction reached `required`; `best` is the most separated attempt.
    Infeasible { best: BlockPartition, required: f64 },
}

impl PartitionOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible(_))
    }

    pub fn partition(&self) -> &BlockPartition {
        match self {
            Self::Feasible(p) | Self::Infeasible { best: p, .. } => p,
        }
    }
}

/// Exact minimum in-block distance: BFS from every member, stopping at the
/// first other member of the same block.
pub fn min_in_block_distance(net: &Network, blocks: &[Vec<NodeId>]) -> Distance {
    let mut owner = vec![usize::MAX; net.n()];
    for (j, b) in blocks.iter().enumerate() {
        for &v in b {
            owner[v] = j;
        }
    }
    blocks
        .par_iter()
        .enumerate()
        .map_init(BfsScratch::new, |scratch, (j, block)| {
            let mut best = INFINITE;
            if block.len() < 2 {
                return best;
            }
            for &src in block {
                scratch.run(net, &[src], |v, d| {
                    if d >= best {
                        return Visit::Stop;
                    }
                    if v != src && owner[v] == j {
                        best = d;
                        return Visit::Stop;
                    }
                    Visit::Continue
                });
            }
            best
        })
        .min()
        .unwrap_or(INFINITE)
}

fn finish(net: &Network, blocks: Vec<Vec<NodeId>>, tail: Vec<NodeId>, b: usize, method: PartitionMethod) -> BlockPartition {
    let separation = min_in_block_distance(net, &blocks);
    BlockPartition { blocks, block_size: b, separation, tail, method }
}

fn singletons(net: &Network) -> BlockPartition {
    BlockPartition {
        blocks: (0..net.n()).map(|v| vec![v]).collect(),
        block_size: 1,
        separation: INFINITE,
        tail: Vec::new(),
        method: PartitionMethod::Singleton,
    }
}

/// Analytic separation of the stride construction, when one exists.
fn stride_separation(topology: Topology, n: usize, b: usize) -> Option<Distance> {
    match topology {
        Topology::Cycle | Topology::Path => Some((n / b) as Distance),
        Topology::Grid { rows, cols } => grid_factors(rows, cols, b).map(|(_, _, sep)| sep),
        Topology::General => None,
    }
}

/// Best `(br, bc, separation)` with `br * bc = b` and a tail shorter than `b`.
fn grid_factors(rows: usize, cols: usize, b: usize) -> Option<(usize, usize, Distance)> {
    let mut best: Option<(usize, usize, Distance)> = None;
    for br in 1..=b.min(rows) {
        if !b.is_multiple_of(br) {
            continue;
        }
        let bc = b / br;
        if bc > cols {
            continue;
        }
        let (sr, sc) = (rows / br, cols / bc);
        let covered = br * sr * bc * sc;
        if rows * cols - covered >= b {
            continue;
        }
        let mut sep = INFINITE;
        if br > 1 {
            sep = sep.min(sr as Distance);
        }
        if bc > 1 {
            sep = sep.min(sc as Distance);
        }
        if best.is_none_or(|(_, _, s)| sep > s) {
            best = Some((br, bc, sep));
        }
    }
    best
}

fn stride_partition(net: &Network, b: usize) -> Option<BlockPartition> {
    let n = net.n();
    match net.topology() {
        Topology::Cycle | Topology::Path => {
            let j_count = n / b;
            let blocks: Vec<Vec<NodeId>> =
                (0..j_count).map(|j| (0..b).map(|k| j + k * j_count).collect()).collect();
            let tail = (j_count * b..n).collect();
            Some(finish(net, blocks, tail, b, PartitionMethod::Stride))
        }
        Topology::Grid { rows, cols } => {
            let (br, bc, _) = grid_factors(rows, cols, b)?;
            let (sr, sc) = (rows / br, cols / bc);
            let mut blocks = Vec::with_capacity(sr * sc);
            let mut used = vec![false; n];
            for a in 0..sr {
                for c in 0..sc {
                    let mut block = Vec::with_capacity(b);
                    for k in 0..br {
                        for l in 0..bc {
                            let v = (a + k * sr) * cols + (c + l * sc);
                            used[v] = true;
                            block.push(v);
                        }
                    }
                    block.sort_unstable();
                    blocks.push(block);
                }
            }
            let tail = (0..n).filter(|&v| !used[v]).collect();
            Some(finish(net, blocks, tail, b, PartitionMethod::Stride))
        }
        Topology::General => None,
    }
}

/// Greedy farthest-point assignment: each node, in id order, joins the open
/// block whose nearest current member is farthest away (distances capped at
/// `ceil(c * b)`; ties to the lowest block index).
fn greedy_partition(net: &Network, b: usize, c: f64) -> BlockPartition {
    let n = net.n();
    let j_count = n / b;
    let cap = (c * b as f64).ceil().max(1.0) as Distance;
    let mut owner = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<NodeId>> = vec![Vec::with_capacity(b); j_count];
    let mut tail = Vec::new();
    let mut scratch = BfsScratch::new();
    let mut nearest = vec![cap; j_count];
    for v in 0..n {
        nearest.iter_mut().for_each(|x| *x = cap);
        scratch.run(net, &[v], |u, d| {
            if d >= cap {
                return Visit::Stop;
            }
            let j = owner[u];
            if j != usize::MAX && d < nearest[j] {
                nearest[j] = d;
            }
            Visit::Continue
        });
        let mut choice: Option<(usize, Distance)> = None;
        for (j, block) in blocks.iter().enumerate() {
            if block.len() < b && choice.is_none_or(|(_, s)| nearest[j] > s) {
                choice = Some((j, nearest[j]));
            }
        }
        match choice {
            Some((j, _)) => {
                owner[v] = j;
                blocks[j].push(v);
            }
            None => tail.push(v),
        }
    }
    finish(net, blocks, tail, b, PartitionMethod::Greedy)
}

/// Partition `N_n` into blocks of size `b` with in-block distances `>= c * b`.
///
/// Cycles, paths and lattices use a stride construction; other graphs use the
/// greedy assignment. Failure is reported with the best separation reached,
/// not searched exhaustively.
pub fn find_block_partition(net: &Network, b: usize, c: f64) -> Result<PartitionOutcome> {
    if b == 0 || b > net.n() {
        return invalid(format!("block size {b} must lie in 1..={}", net.n()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return invalid(format!("separation constant must be positive, got {c}"));
    }
    if b == 1 {
        return Ok(PartitionOutcome::Feasible(singletons(net)));
    }
    let required = c * b as f64;
    let mut best: Option<BlockPartition> = None;
    if let Some(p) = stride_partition(net, b) {
        if p.is_separated(c) {
            return Ok(PartitionOutcome::Feasible(p));
        }
        best = Some(p);
    }
    let g = greedy_partition(net, b, c);
    if g.is_separated(c) {
        return Ok(PartitionOutcome::Feasible(g));
    }
    let best = match best {
        Some(p) if p.separation >= g.separation => p,
        _ => g,
    };
    Ok(PartitionOutcome::Infeasible { best, required })
}

/// Constants of the block-size growth window `c1 n^β1 <= b <= c2 n^β2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowParams {
    pub p: u32,
    /// Parameter dimension.
    pub d: usize,
    pub eta: f64,
    pub c1: f64,
    pub c2: f64,
}

impl WindowParams {
    pub fn validate(&self) -> Result<()> {
        if self.p <= 2 {
            return invalid(format!("p must be an integer > 2, got {}", self.p));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return invalid(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return invalid("c1 and c2 must be positive");
        }
        Ok(())
    }

    fn entropy_term(&self) -> f64 {
        let p = f64::from(self.p);
        1.0 / p + self.d as f64 / (p * p - 1.0)
    }

    pub fn beta1(&self) -> f64 {
        2.0 * self.entropy_term() + self.eta
    }

    pub fn beta2(&self) -> f64 {
        1.0 - self.entropy_term() - self.eta
    }

    /// Growth exponent of the maximal inequality: `max{1 - β1/2, β2}`.
    pub fn maximal_beta(&self) -> f64 {
        (1.0 - self.beta1() / 2.0).max(self.beta2())
    }

    pub fn bounds(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        (self.c1 * nf.powf(self.beta1()), self.c2 * nf.powf(self.beta2()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityWindow {
    pub n: usize,
    pub block_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub beta: f64,
    pub lower: f64,
    pub upper: f64,
    /// `β1 <= β2`; otherwise the window closes as n grows.
    pub exponents_ordered: bool,
    pub in_window: bool,
}

impl SparsityWindow {
    pub fn feasible(&self) -> bool {
        self.exponents_ordered && self.in_window
    }
}

pub fn verify_sparsity_window(b: usize, n: usize, params: &WindowParams) -> Result<SparsityWindow> {
    params.validate()?;
    let (lower, upper) = params.bounds(n);
    let bf = b as f64;
    Ok(SparsityWindow {
        n,
        block_size: b,
        beta1: params.beta1(),
        beta2: params.beta2(),
        beta: params.maximal_beta(),
        lower,
        upper,
        exponents_ordered: params.beta1() <= params.beta2(),
        in_window: lower <= bf && bf <= upper,
    })
}

/// Block size chosen inside the window together with its partition outcome.
#[derive(Debug, Clone)]
pub struct WindowSelection {
    pub window: SparsityWindow,
    /// `None` when no integer block size lies in the window.
    pub outcome: Option<PartitionOutcome>,
}

impl WindowSelection {
    pub fn feasible(&self) -> bool {
        self.window.feasible() && self.outcome.as_ref().is_some_and(|o| o.is_feasible())
    }
}

/// Search the window for a block size admitting a separated partition.
///
/// Stride topologies take the largest feasible size, preferring divisors of
/// `n`; general graphs try up to `GENERAL_TRIES` sizes from the bottom of the
/// window.
pub fn select_block_partition(net: &Network, params: &WindowParams, c: f64) -> Result<WindowSelection> {
    const GENERAL_TRIES: usize = 8;
    params.validate()?;
    let n = net.n();
    let (lower, upper) = params.bounds(n);
    let lo = (lower.ceil() as usize).max(1);
    let hi = (upper.floor() as usize).min(n);
    if lo > hi {
        let window = verify_sparsity_window(lo.min(n), n, params)?;
        return Ok(WindowSelection { window, outcome: None });
    }
    let topo = net.topology();
    let mut order: Vec<usize> = Vec::new();
    if topo == Topology::General {
        order.extend((lo..=hi).take(GENERAL_TRIES));
    } else {
        let predicted_ok = |b: usize| {
            b == 1 || stride_separation(topo, n, b).is_some_and(|s| f64::from(s) >= c * b as f64)
        };
        order.extend((lo..=hi).rev().filter(|&b| n.is_multiple_of(b) && predicted_ok(b)));
        order.extend((lo..=hi).rev().filter(|&b| !n.is_multiple_of(b) && predicted_ok(b)));
        if order.is_empty() {
            order.push(lo);
        }
    }
    let mut best: Option<(usize, PartitionOutcome)> = None;
    for b in order {
        let outcome = find_block_partition(net, b, c)?;
        if outcome.is_feasible() {
            best = Some((b, outcome));
            break;
        }
        let better = best
            .as_ref()
            .is_none_or(|(_, o)| outcome.partition().separation > o.partition().separation);
        if better {
            best = Some((b, outcome));
        }
    }
    let (b, outcome) = best.expect("at least one candidate");
    Ok(WindowSelection { window: verify_sparsity_window(b, n, params)?, outcome: Some(outcome) })
}
