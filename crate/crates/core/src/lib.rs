//! Simulation and verification toolkit for uniform laws of large numbers under
//! network dependence.
//!
//! The crate is split along the objects the theory talks about:
//!
//! - [`netgraph`]: networks, shortest-path distances, shells, block partitions.
//! - [`process`]: conditionally dependent arrays on a network, decay profiles,
//!   conditional and unconditional mean oracles.
//! - [`funcspace`]: compact parameter boxes, bounded Lipschitz families, δ-nets.
//! - [`verify`]: Monte Carlo engines for uniform deviations and maximal moments.
//! - [`estimate`]: M and GMM estimators and consistency experiments.
//! - [`rng`]: counter-based random streams keyed by (master seed, path).

pub mod error;
pub mod estimate;
pub mod funcspace;
pub mod netgraph;
pub mod process;
pub mod rng;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
