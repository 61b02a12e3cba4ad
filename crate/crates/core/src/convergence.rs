//! Convergence of n-agent equilibria to the mean field equilibrium.
//!
//! Two effects separate cleanly. With a deterministic population (every
//! atom replicated in proportion to its weight) the only n-dependence is the
//! `nu^2 theta / n` correction of the strategy denominators, an `O(1/n)`
//! effect. With i.i.d. sampled types the empirical law fluctuates around the
//! true one, which moves the aggregates by `O(n^-1/2)`.

use serde::{Deserialize, Serialize};

use crate::equilibria::{mfe_strategy, solve_mfe, solve_nash};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, ExecMode};
use crate::model::{ModelKind, Population, TypeDistribution};
use crate::simulation::rng::{mix64, pick_atom, NoiseRole, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// Each atom appears `round(n w)` times (largest remainder rounding).
    ReplicatedType,
    /// Types are i.i.d. draws from the distribution.
    IidSampled,
}

impl std::fmt::Display for ConvergenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConvergenceMode::ReplicatedType => "replicated_type",
            ConvergenceMode::IidSampled => "iid_sampled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Largest `|pi_n,i - pi_MFE(type of i)|` over agents and replications.
    pub max_abs_error: f64,
    /// Mean of that error over agents, averaged over replications.
    pub mean_abs_error: f64,
    pub replications: usize,
    /// Replications whose n-agent game could not be solved.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub mode: ConvergenceMode,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Columns `mode,n,replication_count,failures,max_abs_error,mean_abs_error`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,n,replication_count,failures,max_abs_error,mean_abs_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e}\n",
                self.mode, r.n, r.replications, r.failures, r.max_abs_error, r.mean_abs_error
            ));
        }
        out
    }
}

/// `n` i.i.d. draws from `d`, deterministic in `seed`.
pub fn sample_population(d: &TypeDistribution, n: usize, seed: u64) -> Result<Population> {
    if n == 0 {
        return Err(Error::domain("population size must be >= 1"));
    }
    if d.is_empty() {
        return Err(Error::domain("a type distribution needs at least one atom"));
    }
    let agents = (0..n)
        .map(|j| {
            let u = StreamRng::new(seed, 0, j as u64, NoiseRole::TypeDraw).uniform();
            d.atoms()[pick_atom(d, u)].agent
        })
        .collect();
    Ok(Population::from_valid_agents(agents))
}

/// Atom counts summing to `n`, as close to `n w_k` as possible.
pub fn replicated_counts(d: &TypeDistribution, n: usize) -> Vec<usize> {
    let exact: Vec<f64> = d.atoms().iter().map(|a| a.weight * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps ties in atom order.
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal)
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

fn replicated_population(d: &TypeDistribution, n: usize) -> Population {
    let agents = d
        .atoms()
        .iter()
        .zip(replicated_counts(d, n))
        .flat_map(|(atom, c)| std::iter::repeat_n(atom.agent, c))
        .collect();
    Population::from_valid_agents(agents)
}

/// Per-replication `(max, mean)` error, or `None` if the game is unsolvable.
fn replication_error(kind: ModelKind, p: &Population, mf_vol: f64) -> Option<(f64, f64)> {
    let eq = solve_nash(kind, p).ok()?;
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    for (a, pi) in p.agents().iter().zip(&eq.strategies) {
        let e = (pi - mfe_strategy(kind, a, mf_vol)).abs();
        max = max.max(e);
        sum += e;
    }
    Some((max, sum / p.len() as f64))
}

/// Solves the n-agent game for every `n` in `n_list` and compares each
/// agent's strategy with the mean field strategy of its own type.
pub fn convergence_study(
    kind: ModelKind,
    d: &TypeDistribution,
    mode: ConvergenceMode,
    n_list: &[usize],
    replications: usize,
    seed: u64,
    exec: ExecMode,
) -> Result<ConvergenceTable> {
    d.validate(kind)?;
    if n_list.is_empty() || n_list[0] == 0 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("n_list must be nonempty, positive and strictly increasing"));
    }
    if replications == 0 {
        return Err(Error::domain("replications must be >= 1"));
    }
    let mf_vol = solve_mfe(kind, d)?.aggregate_vol();
    let reps = match mode {
        ConvergenceMode::ReplicatedType => 1,
        ConvergenceMode::IidSampled => replications,
    };
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let results = map_indexed(exec, reps, |r| {
            let p = match mode {
                ConvergenceMode::ReplicatedType => replicated_population(d, n),
                ConvergenceMode::IidSampled => {
                    let rep_seed = mix64(seed ^ mix64(n as u64).wrapping_add(r as u64));
                    sample_population(d, n, rep_seed).expect("n >= 1 and d nonempty")
                }
            };
            replication_error(kind, &p, mf_vol)
        });
        let ok: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
        let failures = reps - ok.len();
        let (max_abs_error, mean_abs_error) = if ok.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                ok.iter().map(|e| e.0).fold(0.0, f64::max),
                ok.iter().map(|e| e.1).sum::<f64>() / ok.len() as f64,
            )
        };
        rows.push(ConvergenceRow { n, max_abs_error, mean_abs_error, replications: reps, failures });
    }
    Ok(ConvergenceTable { mode, rows })
}

/// Least-squares slope of `log error` against `log n`, negated: errors
/// decaying like `n^-a` give `a`.
pub fn fit_decay_exponent(ns: &[usize], errors: &[f64]) -> Result<f64> {
    if ns.len() != errors.len() || ns.len() < 2 {
        return Err(Error::domain("need at least two (n, error) pairs of equal length"));
    }
    if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
        return Err(Error::domain("errors must be positive and finite to fit a decay rate"));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("n values must not all be equal"));
    }
    Ok(-sxy / sxx)
}
