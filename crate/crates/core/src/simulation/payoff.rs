//! Payoffs of constant strategy profiles.
//!
//! Under constant strategies the relevant terminal quantity is Gaussian:
//! `X_i - theta X_bar` for CARA (arithmetic mean) and
//! `log X_i - theta log X_bar` for CRRA (geometric mean). Its mean `m` and
//! variance `s^2` give the expected utility in closed form:
//!
//! * CARA: `-exp(-m / delta + s^2 / (2 delta^2))`
//! * CRRA, `p = 1 - 1/delta != 0`: `exp(p m + p^2 s^2 / 2) / p`
//! * CRRA, `delta = 1`: `m`

use serde::{Deserialize, Serialize};

use super::terminal::{check_inputs, log_growth, terminal_noise};
use super::{SimConfig, PATH_BLOCK};
use crate::error::{Error, Result};
use crate::exec::map_blocks;
use crate::model::{expect, AgentType, ModelKind, Population, TypeDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub num_paths: usize,
    /// CARA: `-delta log(-mean)`; CRRA power: `(p mean)^(1/p)`; log: `exp(mean)`.
    pub certainty_equivalent: f64,
}

fn check_profile(kind: ModelKind, i: usize, p: &Population, strategies: &[f64]) -> Result<()> {
    p.validate(kind)?;
    if strategies.len() != p.len() {
        return Err(Error::domain(format!("expected {} strategies, got {}", p.len(), strategies.len())));
    }
    if i >= p.len() {
        return Err(Error::domain(format!("agent index {i} out of range for n={}", p.len())));
    }
    if let Some(k) = strategies.iter().position(|s| !s.is_finite()) {
        return Err(Error::domain(format!("strategy {k} is not finite")));
    }
    Ok(())
}

/// Weight of agent `k` in agent `i`'s relative quantity.
#[inline]
fn coefficient(i: usize, k: usize, theta: f64, n: f64) -> f64 {
    if k == i {
        1.0 - theta / n
    } else {
        -theta / n
    }
}

/// Mean and variance of the Gaussian relative quantity of agent `i`.
pub(crate) fn relative_moments(
    kind: ModelKind,
    i: usize,
    p: &Population,
    strategies: &[f64],
    horizon: f64,
) -> (f64, f64) {
    let n = p.len() as f64;
    let theta = p.agents()[i].theta;
    let (mut m, mut idio, mut common) = (0.0, 0.0, 0.0);
    for (k, (a, &pi)) in p.agents().iter().zip(strategies).enumerate() {
        let c = coefficient(i, k, theta, n);
        m += c * match kind {
            ModelKind::Cara => a.x0 + pi * a.mu * horizon,
            ModelKind::Crra => a.x0.ln() + (a.mu * pi - 0.5 * a.total_variance() * pi * pi) * horizon,
        };
        idio += (c * pi * a.nu).powi(2);
        common += c * pi * a.sigma;
    }
    (m, horizon * (idio + common * common))
}

fn utility_of_moments(kind: ModelKind, delta: f64, m: f64, s2: f64) -> f64 {
    match kind {
        ModelKind::Cara => -(-m / delta + s2 / (2.0 * delta * delta)).exp(),
        ModelKind::Crra if delta == 1.0 => m,
        ModelKind::Crra => {
            let p = 1.0 - 1.0 / delta;
            (p * m + 0.5 * p * p * s2).exp() / p
        }
    }
}

/// Certainty equivalent expressed through `(m, s^2)`; for CRRA this is the
/// wealth-ratio certainty equivalent `exp(m + p s^2 / 2)`.
fn certainty_of_moments(kind: ModelKind, delta: f64, m: f64, s2: f64) -> f64 {
    match kind {
        ModelKind::Cara => m - s2 / (2.0 * delta),
        ModelKind::Crra => (m + 0.5 * (1.0 - 1.0 / delta) * s2).exp(),
    }
}

/// Expected utility of agent `i` when everyone plays `strategies`.
pub fn exact_payoff(
    kind: ModelKind,
    i: usize,
    p: &Population,
    strategies: &[f64],
    horizon: f64,
) -> Result<f64> {
    check_profile(kind, i, p, strategies)?;
    let (m, s2) = relative_moments(kind, i, p, strategies, horizon);
    Ok(utility_of_moments(kind, p.agents()[i].delta, m, s2))
}

/// Certainty equivalent of [`exact_payoff`], a strictly increasing
/// transform of it that is concave in agent `i`'s own strategy.
pub fn exact_certainty_equivalent(
    kind: ModelKind,
    i: usize,
    p: &Population,
    strategies: &[f64],
    horizon: f64,
) -> Result<f64> {
    check_profile(kind, i, p, strategies)?;
    let (m, s2) = relative_moments(kind, i, p, strategies, horizon);
    Ok(certainty_of_moments(kind, p.agents()[i].delta, m, s2))
}

/// Law of the mean field aggregate given the common noise:
/// `X_bar_T = intercept + drift T + vol B_T` (CARA) and
/// `log X_bar_T = intercept + drift T + vol B_T` (CRRA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAggregate {
    pub intercept: f64,
    pub drift: f64,
    pub vol: f64,
}

/// Conditional aggregate generated by a population law `d` playing
/// `strategies` (one per atom).
pub fn conditional_aggregate(
    kind: ModelKind,
    d: &TypeDistribution,
    strategies: &[f64],
) -> Result<ConditionalAggregate> {
    d.validate(kind)?;
    if strategies.len() != d.len() {
        return Err(Error::domain(format!("expected {} strategies, got {}", d.len(), strategies.len())));
    }
    let mut mu_pi = 0.0;
    let mut var_pi2 = 0.0;
    let mut vol = 0.0;
    for (atom, &pi) in d.atoms().iter().zip(strategies) {
        let a = &atom.agent;
        mu_pi += atom.weight * a.mu * pi;
        var_pi2 += atom.weight * a.total_variance() * pi * pi;
        vol += atom.weight * a.sigma * pi;
    }
    let (intercept, drift) = match kind {
        ModelKind::Cara => (expect(d, |a| a.x0)?, mu_pi),
        ModelKind::Crra => (expect(d, |a| a.x0.ln())?, mu_pi - 0.5 * var_pi2),
    };
    Ok(ConditionalAggregate { intercept, drift, vol })
}

fn mf_moments(kind: ModelKind, a: &AgentType, pi: f64, agg: &ConditionalAggregate, t: f64) -> (f64, f64) {
    let bench = a.theta * (agg.intercept + agg.drift * t);
    let m = match kind {
        ModelKind::Cara => a.x0 + pi * a.mu * t - bench,
        ModelKind::Crra => a.x0.ln() + (a.mu * pi - 0.5 * a.total_variance() * pi * pi) * t - bench,
    };
    let common = pi * a.sigma - a.theta * agg.vol;
    (m, t * ((pi * a.nu).powi(2) + common * common))
}

/// Expected utility of a representative agent of type `agent` playing `pi`
/// against the conditional aggregate `agg`.
pub fn exact_mf_payoff(
    kind: ModelKind,
    agent: &AgentType,
    pi: f64,
    agg: &ConditionalAggregate,
    horizon: f64,
) -> Result<f64> {
    check_inputs(kind, &[(*agent, pi)])?;
    let (m, s2) = mf_moments(kind, agent, pi, agg, horizon);
    Ok(utility_of_moments(kind, agent.delta, m, s2))
}

/// Change of the certainty-equivalent objective (CARA: `m - s^2/(2 delta)`,
/// CRRA: `m + p s^2 / 2`) when the deviating strategy moves from `pi_ref` to
/// `pi_ref + u`. Evaluating the difference directly keeps the large constant
/// parts of `m` and `s^2` out of the comparison, which matters for line
/// searches near a flat maximum.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Deviation {
    kind: ModelKind,
    delta: f64,
    /// Weight of the deviator in its own relative quantity.
    c: f64,
    mu: f64,
    total_var: f64,
    nu2: f64,
    sigma: f64,
    horizon: f64,
    pub(crate) pi_ref: f64,
    /// Common-noise loading of the relative quantity at `pi_ref`.
    common_ref: f64,
}

impl Deviation {
    pub(crate) fn nash(
        kind: ModelKind,
        i: usize,
        p: &Population,
        strategies: &[f64],
        horizon: f64,
    ) -> Result<Self> {
        check_profile(kind, i, p, strategies)?;
        let n = p.len() as f64;
        let a = &p.agents()[i];
        let common_ref: f64 = p
            .agents()
            .iter()
            .zip(strategies)
            .enumerate()
            .map(|(k, (b, &pi))| coefficient(i, k, a.theta, n) * pi * b.sigma)
            .sum();
        Ok(Deviation {
            kind,
            delta: a.delta,
            c: 1.0 - a.theta / n,
            mu: a.mu,
            total_var: a.total_variance(),
            nu2: a.nu * a.nu,
            sigma: a.sigma,
            horizon,
            pi_ref: strategies[i],
            common_ref,
        })
    }

    pub(crate) fn mean_field(
        kind: ModelKind,
        a: &AgentType,
        pi_ref: f64,
        agg: &ConditionalAggregate,
        horizon: f64,
    ) -> Result<Self> {
        check_inputs(kind, &[(*a, pi_ref)])?;
        Ok(Deviation {
            kind,
            delta: a.delta,
            c: 1.0,
            mu: a.mu,
            total_var: a.total_variance(),
            nu2: a.nu * a.nu,
            sigma: a.sigma,
            horizon,
            pi_ref,
            common_ref: pi_ref * a.sigma - a.theta * agg.vol,
        })
    }

    /// The same objective measured from `pi` instead of `pi_ref`.
    pub(crate) fn recentered(&self, pi: f64) -> Deviation {
        Deviation {
            pi_ref: pi,
            common_ref: self.common_ref + self.c * self.sigma * (pi - self.pi_ref),
            ..*self
        }
    }

    pub(crate) fn eval(&self, u: f64) -> f64 {
        let c = self.c;
        let t = self.horizon;
        let ds2 = t
            * (c * c * self.nu2 * u * (2.0 * self.pi_ref + u)
                + c * self.sigma * u * (2.0 * self.common_ref + c * self.sigma * u));
        match self.kind {
            ModelKind::Cara => c * u * self.mu * t - ds2 / (2.0 * self.delta),
            ModelKind::Crra => {
                let dm = c * t * (self.mu * u - 0.5 * self.total_var * u * (2.0 * self.pi_ref + u));
                dm + 0.5 * (1.0 - 1.0 / self.delta) * ds2
            }
        }
    }
}

/// Block accumulator. Single-signed payoffs (CARA, CRRA power) are
/// accumulated as log-magnitudes `a_j` with a running shift, so that the mean
/// and second moment never overflow; the log branch keeps plain moments.
#[derive(Debug, Clone, Copy)]
enum Acc {
    Log { count: usize, shift: f64, s1: f64, s2: f64 },
    Plain { count: usize, mean: f64, m2: f64 },
}

impl Acc {
    fn from_log_magnitudes(a: &[f64]) -> Acc {
        let shift = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut s1, mut s2) = (0.0, 0.0);
        for &x in a {
            let e = (x - shift).exp();
            s1 += e;
            s2 += e * e;
        }
        Acc::Log { count: a.len(), shift, s1, s2 }
    }

    fn from_values(v: &[f64]) -> Acc {
        let count = v.len();
        let mean = v.iter().sum::<f64>() / count as f64;
        let m2 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        Acc::Plain { count, mean, m2 }
    }

    fn merge(self, other: Acc) -> Acc {
        match (self, other) {
            (
                Acc::Log { count: n1, shift: a, s1: p1, s2: q1 },
                Acc::Log { count: n2, shift: b, s1: p2, s2: q2 },
            ) => {
                let shift = a.max(b);
                let (ea, eb) = ((a - shift).exp(), (b - shift).exp());
                Acc::Log { count: n1 + n2, shift, s1: p1 * ea + p2 * eb, s2: q1 * ea * ea + q2 * eb * eb }
            }
            (Acc::Plain { count: n1, mean: m1, m2: v1 }, Acc::Plain { count: n2, mean: m2, m2: v2 }) => {
                let n = n1 + n2;
                let delta = m2 - m1;
                let mean = m1 + delta * n2 as f64 / n as f64;
                let m2 = v1 + v2 + delta * delta * (n1 as f64) * (n2 as f64) / n as f64;
                Acc::Plain { count: n, mean, m2 }
            }
            _ => unreachable!("accumulators of one estimate share a branch"),
        }
    }
}

/// Monte Carlo estimate of agent `i`'s expected utility with the common
/// noise shared across agents on each path.
pub fn mc_payoff(
    kind: ModelKind,
    i: usize,
    p: &Population,
    strategies: &[f64],
    config: &SimConfig,
) -> Result<PayoffEstimate> {
    check_profile(kind, i, p, strategies)?;
    config.validate()?;
    let n = p.len();
    let nf = n as f64;
    let me = p.agents()[i];
    let t = config.horizon;
    let log_branch = kind == ModelKind::Crra && me.delta == 1.0;
    let power = 1.0 - 1.0 / me.delta;

    let blocks = map_blocks(config.exec, config.num_paths, PATH_BLOCK, |range| {
        let mut samples = Vec::with_capacity(range.len());
        for path in range {
            // Relative quantity Z (CARA) or L (CRRA) on this path.
            let mut rel = 0.0;
            for (k, (a, &pi)) in p.agents().iter().zip(strategies).enumerate() {
                let (w, b) = terminal_noise(config.seed, path, k, t, true);
                let c = coefficient(i, k, me.theta, nf);
                rel += c * match kind {
                    ModelKind::Cara => a.x0 + pi * (a.mu * t + a.nu * w + a.sigma * b),
                    ModelKind::Crra => a.x0.ln() + log_growth(a, pi, t, w, b),
                };
            }
            samples.push(match kind {
                ModelKind::Cara => -rel / me.delta,
                ModelKind::Crra if log_branch => rel,
                ModelKind::Crra => power * rel,
            });
        }
        if log_branch {
            Acc::from_values(&samples)
        } else {
            Acc::from_log_magnitudes(&samples)
        }
    });
    let acc = blocks.into_iter().reduce(Acc::merge).expect("num_paths >= 1 yields at least one block");

    let num_paths = config.num_paths;
    let nn = num_paths as f64;
    let estimate = match acc {
        Acc::Plain { mean, m2, .. } => {
            let se = if num_paths > 1 { (m2 / (nn - 1.0) / nn).sqrt() } else { 0.0 };
            PayoffEstimate { mean, std_error: se, num_paths, certainty_equivalent: mean.exp() }
        }
        Acc::Log { shift, s1, s2, .. } => {
            // log |mean| and the relative variance of the samples.
            let log_mag = shift + (s1 / nn).ln();
            let ratio = (nn * s2 / (s1 * s1) - 1.0).max(0.0);
            let (sign, log_scale, ce) = match kind {
                ModelKind::Cara => (-1.0, 0.0, -me.delta * log_mag),
                _ => (power.signum(), -power.abs().ln(), (log_mag / power).exp()),
            };
            let mean = sign * (log_mag + log_scale).exp();
            let se = if num_paths > 1 { mean.abs() * (ratio / (nn - 1.0)).sqrt() } else { 0.0 };
            PayoffEstimate { mean, std_error: se, num_paths, certainty_equivalent: ce }
        }
    };
    if !estimate.mean.is_finite() || !estimate.std_error.is_finite() {
        return Err(Error::Numeric(format!(
            "Monte Carlo accumulation is not finite (mean {}, std error {})",
            estimate.mean, estimate.std_error
        )));
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecMode;

    #[test]
    fn degenerate_cara_payoff() {
        let p = Population::new(vec![AgentType::new(0.0, 1.0, 0.0, 1.0, 1.0, 1.0)], ModelKind::Cara).unwrap();
        assert_eq!(exact_payoff(ModelKind::Cara, 0, &p, &[0.0], 1.0).unwrap(), -1.0);
        let est = mc_payoff(ModelKind::Cara, 0, &p, &[0.0], &SimConfig::new(1.0, 1000, 1)).unwrap();
        assert_eq!(est.mean, -1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn crra_log_payoff_is_mean_log_growth() {
        let a = AgentType::new(1.0, 1.0, 0.0, 0.3, 0.4, 0.5);
        let p = Population::new(vec![a], ModelKind::Crra).unwrap();
        let pi = 0.7;
        let v = exact_payoff(ModelKind::Crra, 0, &p, &[pi], 1.0).unwrap();
        assert!((v - (0.3 * pi - 0.5 * 0.41 * pi * pi)).abs() < 1e-15);
    }

    #[test]
    fn deviation_matches_certainty_equivalent_differences() {
        let agents = vec![
            AgentType::new(1.0, 2.0, 0.6, 0.3, 0.4, 0.5),
            AgentType::new(2.0, 0.5, 0.2, 0.2, 0.1, 0.7),
            AgentType::new(1.5, 1.0, 0.9, 0.4, 0.3, 0.2),
        ];
        let s = [0.4, -0.3, 1.1];
        for kind in [ModelKind::Cara, ModelKind::Crra] {
            let p = Population::new(agents.clone(), kind).unwrap();
            for i in 0..3 {
                let dev = Deviation::nash(kind, i, &p, &s, 1.7).unwrap();
                let (m0, v0) = relative_moments(kind, i, &p, &s, 1.7);
                for u in [-0.5, 0.1, 2.0] {
                    let mut moved = s;
                    moved[i] += u;
                    let (m1, v1) = relative_moments(kind, i, &p, &moved, 1.7);
                    let d = agents[i].delta;
                    let h = |m: f64, v: f64| match kind {
                        ModelKind::Cara => m - v / (2.0 * d),
                        ModelKind::Crra => m + 0.5 * (1.0 - 1.0 / d) * v,
                    };
                    assert!((dev.eval(u) - (h(m1, v1) - h(m0, v0))).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn mc_is_identical_across_modes() {
        let agents =
            vec![AgentType::new(1.0, 2.0, 0.6, 0.3, 0.4, 0.5), AgentType::new(2.0, 0.5, 0.2, 0.2, 0.1, 0.7)];
        let p = Population::new(agents, ModelKind::Crra).unwrap();
        let mut cfg = SimConfig::new(1.0, 20_000, 42);
        cfg.exec = ExecMode::Sequential;
        let a = mc_payoff(ModelKind::Crra, 0, &p, &[0.5, 0.2], &cfg).unwrap();
        cfg.exec = ExecMode::Parallel;
        let b = mc_payoff(ModelKind::Crra, 0, &p, &[0.5, 0.2], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_agrees_with_exact() {
        let agents =
            vec![AgentType::new(1.0, 2.0, 0.6, 0.3, 0.4, 0.5), AgentType::new(2.0, 1.0, 0.2, 0.2, 0.1, 0.7)];
        let s = [0.5, 0.2];
        for kind in [ModelKind::Cara, ModelKind::Crra] {
            let p = Population::new(agents.clone(), kind).unwrap();
            for i in 0..2 {
                let exact = exact_payoff(kind, i, &p, &s, 1.0).unwrap();
                let est = mc_payoff(kind, i, &p, &s, &SimConfig::new(1.0, 100_000, 7)).unwrap();
                assert!(
                    (est.mean - exact).abs() < 4.0 * est.std_error,
                    "{kind} agent {i}: {} +- {} vs {exact}",
                    est.mean,
                    est.std_error
                );
            }
        }
    }

    #[test]
    fn mean_field_payoff_of_point_mass_without_idiosyncratic_noise() {
        // With nu = 0 and a point mass the aggregate equals own wealth, so
        // X - theta X_bar is deterministic only through the drift term.
        let a = AgentType::new(1.0, 2.0, 0.5, 0.3, 0.0, 0.6);
        let d = TypeDistribution::point_mass(a, ModelKind::Cara).unwrap();
        let agg = conditional_aggregate(ModelKind::Cara, &d, &[0.8]).unwrap();
        let v = exact_mf_payoff(ModelKind::Cara, &a, 0.8, &agg, 1.0).unwrap();
        let m = 0.5 * (1.0 + 0.8 * 0.3);
        let s2 = (0.5 * 0.8 * 0.6f64).powi(2);
        assert!((v - (-(-m / 2.0 + s2 / 8.0).exp())).abs() < 1e-15);
    }
}
