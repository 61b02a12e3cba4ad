//! Constant Nash equilibria of n-agent CARA/CRRA portfolio games with relative
//! performance concerns, the constant equilibria of the corresponding mean
//! field games, and the machinery used to check them: exact Gaussian payoff
//! evaluation, Monte Carlo estimation, numerical best responses, consistency
//! of the mean field aggregate and n → ∞ convergence studies.
//!
//! Data-parallel loops (Monte Carlo paths, replications, sweeps) go through
//! [`exec`], which uses rayon when the `parallel` feature is enabled and falls
//! back to plain iteration otherwise. Results never depend on the degree of
//! parallelism.

// `!(x > 0.0)` is used on purpose so that NaN fails domain checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod equilibria;
pub mod error;
pub mod exec;
pub mod model;
pub mod simulation;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use model::{AgentType, ModelKind, Population, SingleStockSpec, TypeDistribution};
