//! Exact sampling of terminal wealth under constant strategies, closed-form
//! and Monte Carlo payoffs, numerical best responses and the mean field
//! consistency check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::ExecMode;

pub mod best_response;
pub mod consistency;
pub mod payoff;
pub mod rng;
pub mod terminal;

pub use best_response::{best_response, best_response_mf, golden_section_max};
pub use consistency::{mfe_consistency_check, ConsistencyReport};
pub use payoff::{
    conditional_aggregate, exact_certainty_equivalent, exact_mf_payoff, exact_payoff, mc_payoff,
    ConditionalAggregate, PayoffEstimate,
};
pub use terminal::{simulate_paths, simulate_terminal, PathSet, WealthMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub num_paths: usize,
    pub seed: u64,
    /// Population size of the mean field consistency check.
    pub num_agents_sampled: usize,
    /// Grid points of path output; terminal sampling ignores it.
    pub time_steps: usize,
    #[serde(default)]
    pub exec: ExecMode,
}

impl SimConfig {
    pub fn new(horizon: f64, num_paths: usize, seed: u64) -> Self {
        SimConfig {
            horizon,
            num_paths,
            seed,
            num_agents_sampled: 10_000,
            time_steps: 1,
            exec: ExecMode::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain(format!("horizon must be > 0 (got {})", self.horizon)));
        }
        if self.num_paths == 0 {
            return Err(Error::domain("num_paths must be >= 1"));
        }
        if self.time_steps == 0 {
            return Err(Error::domain("time_steps must be >= 1"));
        }
        Ok(())
    }
}

/// Paths per parallel work unit. Fixed so that block-wise reductions are
/// identical for every thread count.
pub(crate) const PATH_BLOCK: usize = 4096;
