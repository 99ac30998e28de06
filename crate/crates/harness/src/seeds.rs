//! Per-stage seeds derived from the master seed.

use netulln_core::rng::Stream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub network: u64,
    pub certify: u64,
    pub ulln_conditional: u64,
    pub ulln_unconditional: u64,
    pub maximal: u64,
    pub blocks: u64,
    pub estimate: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        let s = |tag: &str| Stream::root(master).stage(tag).seed();
        Self {
            master,
            network: s("network"),
            certify: s("certify"),
            ulln_conditional: s("ulln-conditional"),
            ulln_unconditional: s("ulln-unconditional"),
            maximal: s("maximal"),
            blocks: s("blocks"),
            estimate: s("estimate"),
        }
    }

    /// Graph seed for size `n`, so every stage sees the same random graph.
    pub fn network(&self, n: usize) -> u64 {
        Stream::root(self.network).index(n as u64).seed()
    }
}
