//! Terminal wealth and wealth paths.
//!
//! CARA wealth is `x0 + pi (mu t + nu W_t + sigma B_t)`; CRRA wealth is
//! `x0 exp((mu pi - (sigma^2 + nu^2) pi^2 / 2) t + pi nu W_t + pi sigma B_t)`.
//! Both are functions of the Brownian values only, so terminal wealth is
//! sampled exactly from two normals per agent and path.

use serde::{Deserialize, Serialize};

use super::rng::{normal_at, NoiseRole, StreamRng, COMMON_AGENT};
use super::{SimConfig, PATH_BLOCK};
use crate::error::{Error, Result};
use crate::exec::map_blocks;
use crate::model::{validate_type, AgentType, ModelKind};

/// Row-major `[path][agent]` matrix of terminal wealths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WealthMatrix {
    pub num_paths: usize,
    pub num_agents: usize,
    pub values: Vec<f64>,
}

impl WealthMatrix {
    pub fn row(&self, path: usize) -> &[f64] {
        &self.values[path * self.num_agents..(path + 1) * self.num_agents]
    }

    pub fn get(&self, path: usize, agent: usize) -> f64 {
        self.values[path * self.num_agents + agent]
    }
}

/// Terminal values `(W_T, B_T)` of agent `agent` on `path`.
pub(crate) fn terminal_noise(
    seed: u64,
    path: usize,
    agent: usize,
    horizon: f64,
    shared_common_noise: bool,
) -> (f64, f64) {
    let sd = horizon.sqrt();
    let w = sd * normal_at(seed, path as u64, agent as u64, NoiseRole::Idiosyncratic);
    let common_agent = if shared_common_noise { COMMON_AGENT } else { agent as u64 };
    let b = sd * normal_at(seed, path as u64, common_agent, NoiseRole::Common);
    (w, b)
}

/// Wealth at time `t` given `W_t` and `B_t`.
#[inline]
pub(crate) fn wealth(kind: ModelKind, a: &AgentType, pi: f64, t: f64, w: f64, b: f64) -> f64 {
    match kind {
        ModelKind::Cara => a.x0 + pi * (a.mu * t + a.nu * w + a.sigma * b),
        ModelKind::Crra => a.x0 * log_growth(a, pi, t, w, b).exp(),
    }
}

/// `log(X_t / x0)` under CRRA.
#[inline]
pub(crate) fn log_growth(a: &AgentType, pi: f64, t: f64, w: f64, b: f64) -> f64 {
    (a.mu * pi - 0.5 * a.total_variance() * pi * pi) * t + pi * (a.nu * w + a.sigma * b)
}

pub(crate) fn check_inputs(kind: ModelKind, agents: &[(AgentType, f64)]) -> Result<()> {
    if agents.is_empty() {
        return Err(Error::domain("at least one agent is required"));
    }
    for (i, (a, pi)) in agents.iter().enumerate() {
        validate_type(a, kind).map_err(|e| match e {
            Error::Domain(m) => Error::Domain(format!("agent {i}: {m}")),
            other => other,
        })?;
        if !pi.is_finite() {
            return Err(Error::domain(format!("agent {i}: strategy must be finite (got {pi})")));
        }
    }
    Ok(())
}

fn check_value(kind: ModelKind, x: f64, path: usize, agent: usize) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Numeric(format!("wealth overflow on path {path} (agent {agent})")));
    }
    if kind == ModelKind::Crra && !(x > 0.0) {
        return Err(Error::Numeric(format!("wealth underflow to zero on path {path} (agent {agent})")));
    }
    Ok(())
}

/// Samples terminal wealth of every agent on every path. With
/// `shared_common_noise` all agents of a path see the same `B_T`; otherwise
/// each agent gets an independent copy.
pub fn simulate_terminal(
    kind: ModelKind,
    agents: &[(AgentType, f64)],
    config: &SimConfig,
    shared_common_noise: bool,
) -> Result<WealthMatrix> {
    config.validate()?;
    check_inputs(kind, agents)?;
    let n = agents.len();
    let t = config.horizon;
    let blocks = map_blocks(config.exec, config.num_paths, PATH_BLOCK, |range| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(range.len() * n);
        for path in range {
            for (i, (a, pi)) in agents.iter().enumerate() {
                let (w, b) = terminal_noise(config.seed, path, i, t, shared_common_noise);
                let x = wealth(kind, a, *pi, t, w, b);
                check_value(kind, x, path, i)?;
                out.push(x);
            }
        }
        Ok(out)
    });
    let mut values = Vec::with_capacity(config.num_paths * n);
    for block in blocks {
        values.extend(block?);
    }
    Ok(WealthMatrix { num_paths: config.num_paths, num_agents: n, values })
}

/// Wealth on the uniform grid `t_j = j T / time_steps`, `j = 0..=time_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub num_paths: usize,
    pub num_agents: usize,
    /// `[path][agent][time]`, row-major.
    pub values: Vec<f64>,
}

impl PathSet {
    pub fn path(&self, path: usize, agent: usize) -> &[f64] {
        let len = self.times.len();
        let start = (path * self.num_agents + agent) * len;
        &self.values[start..start + len]
    }
}

/// Wealth paths built from exact Gaussian increments of `W` and `B` (the
/// common noise is shared within a path). Paths are drawn from their own
/// streams, independent of [`simulate_terminal`].
pub fn simulate_paths(kind: ModelKind, agents: &[(AgentType, f64)], config: &SimConfig) -> Result<PathSet> {
    config.validate()?;
    check_inputs(kind, agents)?;
    let n = agents.len();
    let steps = config.time_steps;
    let dt = config.horizon / steps as f64;
    let sd = dt.sqrt();
    let times: Vec<f64> = (0..=steps).map(|j| config.horizon * j as f64 / steps as f64).collect();
    // Path streams use a derived seed so they never coincide with terminal draws.
    let seed = super::rng::mix64(config.seed ^ 0x7061_7468);
    let blocks = map_blocks(config.exec, config.num_paths, 256, |range| -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(range.len() * n * (steps + 1));
        for path in range {
            let mut common = StreamRng::new(seed, path as u64, COMMON_AGENT, NoiseRole::Common);
            let mut b = vec![0.0; steps + 1];
            for j in 1..=steps {
                b[j] = b[j - 1] + sd * common.standard_normal();
            }
            for (i, (a, pi)) in agents.iter().enumerate() {
                let mut idio = StreamRng::new(seed, path as u64, i as u64, NoiseRole::Idiosyncratic);
                let mut w = 0.0;
                out.push(a.x0);
                for j in 1..=steps {
                    w += sd * idio.standard_normal();
                    let x = wealth(kind, a, *pi, times[j], w, b[j]);
                    check_value(kind, x, path, i)?;
                    out.push(x);
                }
            }
        }
        Ok(out)
    });
    let mut values = Vec::with_capacity(config.num_paths * n * (steps + 1));
    for block in blocks {
        values.extend(block?);
    }
    Ok(PathSet { times, num_paths: config.num_paths, num_agents: n, values })
}
