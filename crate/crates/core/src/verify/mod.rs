//! Monte Carlo checks of the uniform law of large numbers and the maximal
//! inequality for partial sums.

mod maximal;
mod ulln;

use serde::{Deserialize, Serialize};

pub use maximal::{
    block_moment_check, block_sums, fit_growth_exponent, maximal_moment, run_maximal_experiment, block_power_sum_holds,
    BlockMomentRow, BlockSums, GrowthFit, MaximalConfig, MaximalResult, MaximalRow, MomentEstimate,
};
pub use ulln::{run_ulln_experiment, sup_deviation, SupDeviation, UllnConfig, UllnResult, UllnRow};

/// Net radius as a function of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "schedule", deny_unknown_fields)]
pub enum DeltaSchedule {
    /// `δ_n = n^{-p/(p²-1)}`.
    Rate { p: u32 },
    Fixed { delta: f64 },
}

impl DeltaSchedule {
    pub fn delta(&self, n: usize) -> f64 {
        match *self {
            Self::Rate { p } => {
                let p = f64::from(p);
                (n as f64).powf(-p / (p * p - 1.0))
            }
            Self::Fixed { delta } => delta,
        }
    }
}
