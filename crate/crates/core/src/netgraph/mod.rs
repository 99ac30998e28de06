//! Undirected networks, shortest-path distances and shell statistics.
//!
//! Nodes are `0..n` internally. The edge-list file format and the CLI use
//! 1-based ids; conversion happens only at those boundaries.

mod generate;
mod io;
mod partition;

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::process::DecayProfile;

pub use generate::{generate, GeneratorSpec};
pub use io::{read_edge_list, write_edge_list};
pub use partition::{
    find_block_partition, min_in_block_distance, select_block_partition, verify_sparsity_window,
    BlockPartition, PartitionMethod, PartitionOutcome, SparsityWindow, WindowParams, WindowSelection,
};

pub type NodeId = usize;
pub type Distance = u32;

/// Distance to a node in another component.
pub const INFINITE: Distance = Distance::MAX;

/// Largest `n` for which [`Network::with_distance_cache`] stores all pairs.
pub const DISTANCE_CACHE_LIMIT: usize = 5000;

/// Structural tag set by the generators; enables analytic block partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Topology {
    Cycle,
    Path,
    Grid { rows: usize, cols: usize },
    General,
}

/// Immutable simple undirected graph in compressed adjacency form.
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    offsets: Vec<usize>,
    adjacency: Vec<NodeId>,
    topology: Topology,
    cache: Option<Arc<Vec<Vec<Distance>>>>,
}

impl Network {
    /// Build from an edge list of 0-based pairs. Duplicates are merged; self
    /// loops and out-of-range ids are rejected.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut lists: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return invalid(format!("edge ({a}, {b}) out of range for n = {n}"));
            }
            if a == b {
                return invalid(format!("self loop at node {a}"));
            }
            lists[a].push(b);
            lists[b].push(a);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut adjacency = Vec::new();
        offsets.push(0);
        for mut l in lists {
            l.sort_unstable();
            l.dedup();
            adjacency.extend_from_slice(&l);
            offsets.push(adjacency.len());
        }
        Ok(Self { n, offsets, adjacency, topology: Topology::General, cache: None })
    }

    pub(crate) fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    /// Precompute all-pairs distances. Refused above [`DISTANCE_CACHE_LIMIT`].
    pub fn with_distance_cache(mut self) -> Result<Self> {
        if self.n > DISTANCE_CACHE_LIMIT {
            return Err(Error::CacheTooLarge { n: self.n, limit: DISTANCE_CACHE_LIMIT });
        }
        let rows: Vec<Vec<Distance>> =
            (0..self.n).into_par_iter().map(|s| self.bfs_uncached(s)).collect();
        self.cache = Some(Arc::new(rows));
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn has_distance_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adjacency[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: NodeId) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.len() / 2
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors(i).iter().copied().filter(move |&j| j > i).map(move |j| (i, j))
        })
    }

    pub fn has_edge(&self, i: NodeId, j: NodeId) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    fn check_node(&self, i: NodeId) -> Result<()> {
        if i >= self.n {
            return invalid(format!("node {i} out of range for n = {}", self.n));
        }
        Ok(())
    }

    fn bfs_uncached(&self, source: NodeId) -> Vec<Distance> {
        let mut dist = vec![INFINITE; self.n];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u];
            for &v in self.neighbors(u) {
                if dist[v] == INFINITE {
                    dist[v] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Distances from `source` to every node; unreachable nodes get [`INFINITE`].
    pub fn distances_from(&self, source: NodeId) -> Result<Vec<Distance>> {
        self.check_node(source)?;
        Ok(match &self.cache {
            Some(rows) => rows[source].clone(),
            None => self.bfs_uncached(source),
        })
    }

    /// Single-pair distance.
    pub fn distance(&self, i: NodeId, j: NodeId) -> Result<Distance> {
        self.check_node(i)?;
        self.check_node(j)?;
        if let Some(rows) = &self.cache {
            return Ok(rows[i][j]);
        }
        set_distance(self, &[i], &[j])
    }

    /// Nodes within `radius` hops of `source`, with their distances, in BFS order.
    pub fn ball(&self, source: NodeId, radius: Distance, scratch: &mut BfsScratch) -> Vec<(NodeId, Distance)> {
        let mut out = Vec::new();
        scratch.run(self, &[source], |v, d| {
            if d > radius {
                return Visit::Stop;
            }
            out.push((v, d));
            Visit::Continue
        });
        out
    }
}

/// Per-call BFS workspace, reusable across sources to avoid reallocation.
#[derive(Debug, Default)]
pub struct BfsScratch {
    dist: Vec<Distance>,
    touched: Vec<NodeId>,
    queue: VecDeque<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Visit {
    Continue,
    Stop,
}

impl BfsScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Multi-source BFS. `visit` sees nodes in non-decreasing distance order and
    /// may stop the search.
    pub(crate) fn run(
        &mut self,
        net: &Network,
        sources: &[NodeId],
        mut visit: impl FnMut(NodeId, Distance) -> Visit,
    ) {
        if self.dist.len() != net.n {
            self.dist = vec![INFINITE; net.n];
            self.touched.clear();
        }
        for &v in &self.touched {
            self.dist[v] = INFINITE;
        }
        self.touched.clear();
        self.queue.clear();
        for &s in sources {
            if self.dist[s] == INFINITE {
                self.dist[s] = 0;
                self.touched.push(s);
                self.queue.push_back(s);
            }
        }
        while let Some(u) = self.queue.pop_front() {
            let du = self.dist[u];
            if visit(u, du) == Visit::Stop {
                return;
            }
            for &v in net.neighbors(u) {
                if self.dist[v] == INFINITE {
                    self.dist[v] = du + 1;
                    self.touched.push(v);
                    self.queue.push_back(v);
                }
            }
        }
    }
}

/// Exact BFS distances from `source`.
pub fn shortest_path_distances(net: &Network, source: NodeId) -> Result<Vec<Distance>> {
    net.distances_from(source)
}

/// `min { d(i, j) : i ∈ a, j ∈ b }`, or [`INFINITE`] when no pair is connected.
pub fn set_distance(net: &Network, a: &[NodeId], b: &[NodeId]) -> Result<Distance> {
    if a.is_empty() || b.is_empty() {
        return invalid("set_distance needs two nonempty node sets");
    }
    for &v in a.iter().chain(b) {
        net.check_node(v)?;
    }
    let mut target = vec![false; net.n];
    for &v in b {
        target[v] = true;
    }
    let mut found = INFINITE;
    BfsScratch::new().run(net, a, |v, d| {
        if target[v] {
            found = d;
            Visit::Stop
        } else {
            Visit::Continue
        }
    });
    Ok(found)
}

/// Shell sizes `|N(i; s)|` for `s = 0..=s_max` and their averages over nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellStats {
    pub s_max: usize,
    /// `per_node[i][s]`.
    pub per_node: Vec<Vec<usize>>,
    /// Reachable nodes from `i` at distance greater than `s_max`.
    pub beyond: Vec<usize>,
    /// Reachable nodes from `i`, including `i` itself.
    pub reachable: Vec<usize>,
    /// `avg[s] = (1/n) Σ_i |N(i; s)|`.
    pub avg: Vec<f64>,
}

impl ShellStats {
    pub fn shell_size(&self, i: NodeId, s: usize) -> usize {
        self.per_node[i][s]
    }

    pub fn avg_shell_size(&self, s: usize) -> f64 {
        self.avg[s]
    }

    /// `Σ_i |N(i; s)|`.
    pub fn total(&self, s: usize) -> usize {
        self.per_node.iter().map(|row| row[s]).sum()
    }
}

pub fn shell_stats(net: &Network, s_max: usize) -> ShellStats {
    let rows: Vec<(Vec<usize>, usize, usize)> = (0..net.n)
        .into_par_iter()
        .map_init(BfsScratch::new, |scratch, i| {
            let mut shells = vec![0usize; s_max + 1];
            let mut beyond = 0;
            let mut reachable = 0;
            scratch.run(net, &[i], |_, d| {
                reachable += 1;
                match shells.get_mut(d as usize) {
                    Some(c) => *c += 1,
                    None => beyond += 1,
                }
                Visit::Continue
            });
            (shells, beyond, reachable)
        })
        .collect();
    let n = net.n.max(1) as f64;
    let mut avg = vec![0.0; s_max + 1];
    for (shells, _, _) in &rows {
        for (a, &c) in avg.iter_mut().zip(shells) {
            *a += c as f64;
        }
    }
    for a in &mut avg {
        *a /= n;
    }
    let mut per_node = Vec::with_capacity(rows.len());
    let mut beyond = Vec::with_capacity(rows.len());
    let mut reachable = Vec::with_capacity(rows.len());
    for (s, b, r) in rows {
        per_node.push(s);
        beyond.push(b);
        reachable.push(r);
    }
    ShellStats { s_max, per_node, beyond, reachable, avg }
}

/// `Σ_i |N(i; s)|` for every `s` up to `s_max` (or up to the largest finite
/// distance when `s_max` is `None`). Avoids storing per-node rows.
pub fn shell_totals(net: &Network, s_max: Option<usize>) -> Vec<u64> {
    let limit = s_max.map(|s| s as Distance);
    (0..net.n)
        .into_par_iter()
        .map_init(BfsScratch::new, |scratch, i| {
            let mut counts: Vec<u64> = Vec::new();
            scratch.run(net, &[i], |_, d| {
                if limit.is_some_and(|l| d > l) {
                    return Visit::Stop;
                }
                let d = d as usize;
                if counts.len() <= d {
                    counts.resize(d + 1, 0);
                }
                counts[d] += 1;
                Visit::Continue
            });
            counts
        })
        .reduce(Vec::new, |mut a, b| {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        })
}

/// `(1/n) Σ_{s≥1} δ(s) ϑ_s`, the joint denseness/decay quantity.
pub fn denseness_decay_sum(net: &Network, decay: &DecayProfile) -> Result<f64> {
    let totals = shell_totals(net, decay.support_end());
    let n = net.n as f64;
    let mut sum = 0.0;
    for (s, &t) in totals.iter().enumerate().skip(1) {
        if t == 0 {
            continue;
        }
        let theta = decay.value(s).ok_or_else(|| {
            Error::InvalidArgument(format!("decay profile undefined at s = {s} where shells are nonempty"))
        })?;
        sum += t as f64 * theta;
    }
    Ok(sum / (n * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Network {
        Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn path_distances() {
        assert_eq!(shortest_path_distances(&path3(), 0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn cycle_antipode() {
        let c6 = generate(&GeneratorSpec::Cycle { n: 6 }, 0).unwrap();
        assert_eq!(shortest_path_distances(&c6, 0).unwrap()[3], 3);
    }

    #[test]
    fn disconnected_is_infinite() {
        let g = Network::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let d = shortest_path_distances(&g, 0).unwrap();
        assert_eq!(d, vec![0, 1, INFINITE, INFINITE]);
        assert_eq!(set_distance(&g, &[0], &[2, 3]).unwrap(), INFINITE);
    }

    #[test]
    fn source_out_of_range() {
        assert!(shortest_path_distances(&path3(), 3).is_err());
    }

    #[test]
    fn set_distance_cases() {
        let c6 = generate(&GeneratorSpec::Cycle { n: 6 }, 0).unwrap();
        assert_eq!(set_distance(&c6, &[0], &[3]).unwrap(), 3);
        assert_eq!(set_distance(&c6, &[0, 2], &[2, 5]).unwrap(), 0);
        assert!(set_distance(&c6, &[], &[1]).is_err());
        assert!(set_distance(&c6, &[1], &[]).is_err());
    }

    #[test]
    fn set_distance_path5_brute_force() {
        let p5 = generate(&GeneratorSpec::Path { n: 5 }, 0).unwrap();
        let a = [0, 1];
        let b = [3, 4];
        let brute = a
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| shortest_path_distances(&p5, i).unwrap()[j])
            .min()
            .unwrap();
        assert_eq!(brute, 2);
        assert_eq!(set_distance(&p5, &a, &b).unwrap(), brute);
    }

    #[test]
    fn cycle_shells() {
        let c = generate(&GeneratorSpec::Cycle { n: 100 }, 0).unwrap();
        let st = shell_stats(&c, 50);
        assert_eq!(st.avg_shell_size(0), 1.0);
        for s in 1..50 {
            assert_eq!(st.avg_shell_size(s), 2.0);
        }
        assert_eq!(st.avg_shell_size(50), 1.0);
    }

    #[test]
    fn grid_shell_one_brute_force() {
        let g = generate(&GeneratorSpec::Grid { rows: 5, cols: 5 }, 0).unwrap();
        let st = shell_stats(&g, 1);
        // corners have degree 2, edge cells 3, interior 4
        let brute: usize = (0..25)
            .map(|i| shortest_path_distances(&g, i).unwrap().iter().filter(|&&d| d == 1).count())
            .sum();
        assert_eq!(brute, 2 * 4 + 3 * 12 + 4 * 9);
        assert!((st.avg_shell_size(1) - 3.2).abs() < 1e-12);
    }

    #[test]
    fn shell_rows_account_for_reachable() {
        let g = Network::from_edges(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let st = shell_stats(&g, 1);
        for i in 0..5 {
            let inside: usize = st.per_node[i].iter().sum();
            assert_eq!(inside + st.beyond[i], st.reachable[i]);
        }
        assert_eq!(st.reachable, vec![3, 3, 3, 2, 2]);
    }

    #[test]
    fn cache_refused_for_large_networks() {
        let c = generate(&GeneratorSpec::Cycle { n: DISTANCE_CACHE_LIMIT + 1 }, 0).unwrap();
        assert!(matches!(c.with_distance_cache(), Err(Error::CacheTooLarge { .. })));
        let small = generate(&GeneratorSpec::Cycle { n: 20 }, 0).unwrap().with_distance_cache().unwrap();
        assert_eq!(small.distance(0, 10).unwrap(), 10);
        assert_eq!(small.distances_from(3).unwrap(), shortest_path_distances(&small, 3).unwrap());
    }

    #[test]
    fn denseness_examples() {
        let n = 40;
        let c = generate(&GeneratorSpec::Cycle { n }, 0).unwrap();
        let table = DecayProfile::exact(vec![1.0, 1.0, 1.0]);
        let v = denseness_decay_sum(&c, &table).unwrap();
        assert!((v - 4.0 / n as f64).abs() < 1e-15);

        let zero = DecayProfile::exact(vec![1.0]);
        assert_eq!(denseness_decay_sum(&c, &zero).unwrap(), 0.0);

        let k = generate(&GeneratorSpec::ErdosRenyi { n: 30, p_link: 1.0 }, 5).unwrap();
        let v = denseness_decay_sum(&k, &DecayProfile::exact(vec![1.0, 1.0])).unwrap();
        assert!((v - 29.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn denseness_undefined_decay_is_error() {
        let c = generate(&GeneratorSpec::Cycle { n: 10 }, 0).unwrap();
        let partial = DecayProfile::partial(vec![1.0, 0.5]);
        assert!(denseness_decay_sum(&c, &partial).is_err());
    }

    #[test]
    fn denseness_power_bound_closed_form_on_even_cycle() {
        let (a, p) = (2.0, 5u32);
        let q = p as f64 / (p as f64 - 1.0);
        for n in [10usize, 64, 250] {
            let c = generate(&GeneratorSpec::Cycle { n }, 0).unwrap();
            let got = denseness_decay_sum(&c, &DecayProfile::power_bound(a, p)).unwrap();
            let nf = n as f64;
            let head: f64 = (1..n / 2).map(|s| (s as f64).powf(-q)).sum();
            let closed = 2.0 * a / nf * head + a / nf * (nf / 2.0).powf(-q);
            assert!((got - closed).abs() < 1e-12, "n={n}: {got} vs {closed}");
        }
    }
}
