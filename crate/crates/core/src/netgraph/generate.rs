use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Network, NodeId, Topology};
use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Parameters of the built-in network families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GeneratorSpec {
    Cycle { n: usize },
    Path { n: usize },
    Grid { rows: usize, cols: usize },
    /// Points uniform in the unit square, linked when within `radius`.
    RandomGeometric { n: usize, radius: f64 },
    ErdosRenyi { n: usize, p_link: f64 },
}

impl GeneratorSpec {
    pub fn node_count(&self) -> usize {
        match *self {
            Self::Cycle { n } | Self::Path { n } => n,
            Self::RandomGeometric { n, .. } | Self::ErdosRenyi { n, .. } => n,
            Self::Grid { rows, cols } => rows * cols,
        }
    }
}

/// Deterministic given `(spec, seed)`. Cycle, path and grid ignore the seed.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Network> {
    match *spec {
        GeneratorSpec::Cycle { n } => {
            if n < 3 {
                return invalid(format!("cycle needs n >= 3, got {n}"));
            }
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            Ok(Network::from_edges(n, &edges)?.with_topology(Topology::Cycle))
        }
        GeneratorSpec::Path { n } => {
            if n < 1 {
                return invalid("path needs n >= 1");
            }
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            Ok(Network::from_edges(n, &edges)?.with_topology(Topology::Path))
        }
        GeneratorSpec::Grid { rows, cols } => {
            if rows == 0 || cols == 0 {
                return invalid(format!("grid needs positive sides, got {rows}x{cols}"));
            }
            let id = |r: usize, c: usize| r * cols + c;
            let mut edges = Vec::with_capacity(2 * rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    if c + 1 < cols {
                        edges.push((id(r, c), id(r, c + 1)));
                    }
                    if r + 1 < rows {
                        edges.push((id(r, c), id(r + 1, c)));
                    }
                }
            }
            Ok(Network::from_edges(rows * cols, &edges)?.with_topology(Topology::Grid { rows, cols }))
        }
        GeneratorSpec::RandomGeometric { n, radius } => {
            if n < 1 {
                return invalid("random geometric graph needs n >= 1");
            }
            if !(radius > 0.0 && radius.is_finite()) {
                return invalid(format!("radius must be positive and finite, got {radius}"));
            }
            let mut rng = Stream::root(seed).stage("random_geometric").rng();
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
            let r2 = radius * radius;
            let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = pts[i].0 - pts[j].0;
                    let dy = pts[i].1 - pts[j].1;
                    if dx * dx + dy * dy <= r2 {
                        edges.push((i, j));
                    }
                }
            }
            Network::from_edges(n, &edges)
        }
        GeneratorSpec::ErdosRenyi { n, p_link } => {
            if n < 1 {
                return invalid("Erdős–Rényi graph needs n >= 1");
            }
            if !(0.0..=1.0).contains(&p_link) {
                return invalid(format!("p_link must lie in [0, 1], got {p_link}"));
            }
            let mut rng = Stream::root(seed).stage("erdos_renyi").rng();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    // consume one draw per pair so p_link = 1 and p_link < 1 share a stream layout
                    let u: f64 = rng.random();
                    if u < p_link {
                        edges.push((i, j));
                    }
                }
            }
            Network::from_edges(n, &edges)
        }
    }
}
