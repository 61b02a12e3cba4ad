//! Mean field consistency: the aggregate an agent benchmarks against must be
//! the conditional (arithmetic or geometric) mean of the equilibrium wealth
//! of the population, given the common noise.

use serde::{Deserialize, Serialize};

use super::payoff::conditional_aggregate;
use super::rng::{normal_at, pick_atom, NoiseRole, StreamRng, COMMON_AGENT};
use super::terminal::log_growth;
use super::SimConfig;
use crate::equilibria::{EquilibriumResult, Setting};
use crate::error::{Error, Result};
use crate::exec::map_blocks;
use crate::model::{ModelKind, TypeDistribution};

/// Agents per parallel work unit of the population draw.
const AGENT_BLOCK: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `E[x0]` (CARA) or `E[log x0]` (CRRA).
    pub closed_form_intercept: f64,
    /// `E[mu pi]` (CARA) or `E[mu pi] - E[(sigma^2 + nu^2) pi^2] / 2` (CRRA).
    pub closed_form_drift: f64,
    /// `E[sigma pi]`, the equilibrium aggregate volatility.
    pub closed_form_vol: f64,
    /// `E[mu pi] - (E[(sigma^2 + nu^2) pi^2] - E[sigma pi]^2) / 2`, the
    /// relative drift of the geometric mean (reported for both kinds).
    pub eta: f64,
    /// Largest `|simulated - closed form|` over the common-noise draws, on
    /// the wealth scale (CARA) or the log-wealth scale (CRRA).
    pub empirical_max_discrepancy: f64,
    /// Largest discrepancy measured in cross-agent standard errors.
    pub max_z_score: f64,
    pub num_paths: usize,
    pub num_agents_sampled: usize,
    pub passed: bool,
}

/// Running (count, mean, M2) of a block of samples.
#[derive(Debug, Clone, Copy)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn of(v: &[f64]) -> Moments {
        let count = v.len();
        let mean = v.iter().sum::<f64>() / count as f64;
        Moments { count, mean, m2: v.iter().map(|x| (x - mean) * (x - mean)).sum() }
    }

    fn merge(self, o: Moments) -> Moments {
        let n = self.count + o.count;
        let d = o.mean - self.mean;
        Moments {
            count: n,
            mean: self.mean + d * o.count as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.count as f64) * (o.count as f64) / n as f64,
        }
    }
}

/// For each of `config.num_paths` common-noise draws, samples
/// `config.num_agents_sampled` agents from `d` (independent idiosyncratic
/// noise), averages their terminal wealth (log wealth for CRRA) and compares
/// with the closed-form conditional aggregate at the same `B_T`. A draw
/// passes when the discrepancy is within 4 cross-agent standard errors (with
/// a rounding floor of `1e-12 (1 + |closed form|)`).
pub fn mfe_consistency_check(
    kind: ModelKind,
    d: &TypeDistribution,
    mfe: &EquilibriumResult,
    config: &SimConfig,
) -> Result<ConsistencyReport> {
    config.validate()?;
    if mfe.kind != kind || mfe.setting != Setting::MeanField || mfe.strategies.len() != d.len() {
        return Err(Error::domain("consistency check needs the mean field equilibrium of d"));
    }
    if config.num_agents_sampled < 2 {
        return Err(Error::domain("num_agents_sampled must be >= 2"));
    }
    let agg = conditional_aggregate(kind, d, &mfe.strategies)?;
    let mut eta = 0.0;
    let mut mean_var = 0.0;
    for (atom, &pi) in d.atoms().iter().zip(&mfe.strategies) {
        eta += atom.weight * atom.agent.mu * pi;
        mean_var += atom.weight * atom.agent.total_variance() * pi * pi;
    }
    eta -= 0.5 * (mean_var - agg.vol * agg.vol);

    let t = config.horizon;
    let sd = t.sqrt();
    let m = config.num_agents_sampled;
    let mut max_disc: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut passed = true;
    for path in 0..config.num_paths {
        let b = sd * normal_at(config.seed, path as u64, COMMON_AGENT, NoiseRole::Common);
        let closed = agg.intercept + agg.drift * t + agg.vol * b;
        let stats = map_blocks(config.exec, m, AGENT_BLOCK, |range| {
            let values: Vec<f64> = range
                .map(|j| {
                    let u = StreamRng::new(config.seed, path as u64, j as u64, NoiseRole::TypeDraw).uniform();
                    let k = pick_atom(d, u);
                    let a = &d.atoms()[k].agent;
                    let pi = mfe.strategies[k];
                    let w = sd * normal_at(config.seed, path as u64, j as u64, NoiseRole::Idiosyncratic);
                    match kind {
                        ModelKind::Cara => a.x0 + pi * (a.mu * t + a.nu * w + a.sigma * b),
                        ModelKind::Crra => a.x0.ln() + log_growth(a, pi, t, w, b),
                    }
                })
                .collect();
            Moments::of(&values)
        })
        .into_iter()
        .reduce(Moments::merge)
        .expect("at least two sampled agents");
        if !stats.mean.is_finite() || !stats.m2.is_finite() {
            return Err(Error::Numeric(format!("population average is not finite on path {path}")));
        }
        let se = (stats.m2 / (m as f64 - 1.0) / m as f64).sqrt();
        let disc = (stats.mean - closed).abs();
        let floor = 1e-12 * (1.0 + closed.abs());
        if disc > 4.0 * se + floor {
            passed = false;
        }
        max_disc = max_disc.max(disc);
        if se > 0.0 {
            max_z = max_z.max(disc / se);
        }
    }
    Ok(ConsistencyReport {
        closed_form_intercept: agg.intercept,
        closed_form_drift: agg.drift,
        closed_form_vol: agg.vol,
        eta,
        empirical_max_discrepancy: max_disc,
        max_z_score: max_z,
        num_paths: config.num_paths,
        num_agents_sampled: m,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::solve_mfe;
    use crate::model::AgentType;

    #[test]
    fn deterministic_type_without_idiosyncratic_noise_is_exact() {
        for kind in [ModelKind::Cara, ModelKind::Crra] {
            let z = AgentType::new(1.0, 2.0, 0.4, 0.3, 0.0, 0.6);
            let d = TypeDistribution::point_mass(z, kind).unwrap();
            let eq = solve_mfe(kind, &d).unwrap();
            let mut cfg = SimConfig::new(1.0, 3, 5);
            cfg.num_agents_sampled = 100;
            let r = mfe_consistency_check(kind, &d, &eq, &cfg).unwrap();
            assert!(r.passed);
            assert!(r.empirical_max_discrepancy < 1e-14);
            assert!((r.closed_form_vol - eq.aggregate_vol()).abs() < 1e-15);
        }
    }

    #[test]
    fn heterogeneous_population_passes() {
        let a = AgentType::new(1.0, 2.0, 0.4, 0.3, 0.3, 0.6);
        let b = AgentType::new(2.0, 0.5, 0.8, 0.2, 0.5, 0.4);
        for kind in [ModelKind::Cara, ModelKind::Crra] {
            let d = TypeDistribution::new(vec![(a, 0.5), (b, 0.5)], kind).unwrap();
            let eq = solve_mfe(kind, &d).unwrap();
            let mut cfg = SimConfig::new(1.0, 2, 5);
            cfg.num_agents_sampled = 50_000;
            let r = mfe_consistency_check(kind, &d, &eq, &cfg).unwrap();
            assert!(r.passed, "{kind}: {r:?}");
            assert!(r.empirical_max_discrepancy > 0.0);
        }
    }
}
