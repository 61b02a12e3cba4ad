//! Best-response iteration on the aggregate volatility of wealth.
//!
//! Given a candidate aggregate `s`, every agent's best response is computed
//! from its own first-order condition and the aggregate is recomputed as the
//! population average of `sigma * pi`. This module does not call into the
//! closed-form solvers, so it can serve as their oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentType, ModelKind, Population, TypeDistribution};

use super::Aggregates;

#[derive(Debug, Clone, Copy)]
pub enum OracleInput<'a> {
    Population(&'a Population),
    Distribution(&'a TypeDistribution),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    /// Stop once a step moves `s` by at most `tol * max(1, |s|)`.
    pub tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { max_iter: 1_000_000, tol: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointOutcome {
    /// `phi` and `psi` read off the map itself (`T(0)` and the slope), plus
    /// the limit of the iteration.
    pub aggregates: Aggregates,
    /// Updates applied before the step that met the tolerance.
    pub iterations: usize,
    /// Final relaxation factor; 1 unless oscillations forced damping.
    pub damping: f64,
}

/// Best response of one agent (n-agent game when `n` is set, mean field
/// otherwise) to the aggregate volatility `s`.
fn best_response(kind: ModelKind, a: &AgentType, n: Option<usize>, s: f64) -> f64 {
    let (sig2, nu2) = (a.sigma * a.sigma, a.nu * a.nu);
    match kind {
        ModelKind::Cara => {
            let idio = match n {
                Some(n) => nu2 * (1.0 - a.theta / n as f64),
                None => nu2,
            };
            (a.delta * a.mu + a.theta * a.sigma * s) / (sig2 + idio)
        }
        ModelKind::Crra => {
            let idio = match n {
                Some(n) => nu2 * (1.0 + (a.delta - 1.0) * a.theta / n as f64),
                None => nu2,
            };
            (a.delta * a.mu - a.theta * (a.delta - 1.0) * a.sigma * s) / (sig2 + idio)
        }
    }
}

fn aggregate_map(kind: ModelKind, input: OracleInput<'_>, s: f64) -> f64 {
    match input {
        OracleInput::Population(p) => {
            let n = p.len();
            p.agents().iter().map(|a| a.sigma * best_response(kind, a, Some(n), s)).sum::<f64>() / n as f64
        }
        OracleInput::Distribution(d) => d
            .atoms()
            .iter()
            .map(|atom| atom.weight * atom.agent.sigma * best_response(kind, &atom.agent, None, s))
            .sum(),
    }
}

/// Iterates `s -> T(s)` from `s = 0`.
///
/// The CARA map has slope `psi` in `[0, 1]` and converges geometrically when
/// `psi < 1`. The CRRA map has slope `-psi` with `psi > -1` but possibly
/// `psi > 1`; sign-alternating non-contracting steps halve the relaxation
/// factor so the damped map contracts. A constant-step drift (CARA with
/// `psi = 1`) is never damped and ends in `Divergent`.
pub fn fixed_point_oracle(
    kind: ModelKind,
    input: OracleInput<'_>,
    opts: FixedPointOptions,
) -> Result<FixedPointOutcome> {
    match input {
        OracleInput::Population(p) => p.validate(kind)?,
        OracleInput::Distribution(d) => d.validate(kind)?,
    }
    let t0 = aggregate_map(kind, input, 0.0);
    let slope = aggregate_map(kind, input, 1.0) - t0;
    let psi = match kind {
        ModelKind::Cara => slope,
        ModelKind::Crra => -slope,
    };

    let mut s = 0.0_f64;
    let mut lambda = 1.0_f64;
    let mut prev_residual: Option<f64> = None;
    for k in 0..opts.max_iter {
        let residual = aggregate_map(kind, input, s) - s;
        if !residual.is_finite() {
            break;
        }
        if let Some(prev) = prev_residual {
            if prev * residual < 0.0 && residual.abs() > 0.9 * prev.abs() && lambda > 1e-12 {
                lambda *= 0.5;
            }
        }
        prev_residual = Some(residual);
        let step = lambda * residual;
        s += step;
        if step.abs() <= opts.tol * s.abs().max(1.0) {
            // Polish down to the rounding floor of the map.
            let mut r = aggregate_map(kind, input, s) - s;
            for _ in 0..200 {
                let next = s + lambda * r;
                let r_next = aggregate_map(kind, input, next) - next;
                if !(r_next.abs() < r.abs()) {
                    break;
                }
                s = next;
                r = r_next;
            }
            return Ok(FixedPointOutcome {
                aggregates: Aggregates { phi: t0, psi, aggregate_vol: Some(s) },
                iterations: k,
                damping: lambda,
            });
        }
    }
    Err(Error::Divergent { max_iter: opts.max_iter, last: s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SingleStockSpec;

    #[test]
    fn constant_map_converges_in_one_step() {
        let p = Population::new(vec![AgentType::new(0.0, 2.0, 0.0, 1.0, 1.0, 1.0)], ModelKind::Cara).unwrap();
        let out =
            fixed_point_oracle(ModelKind::Cara, OracleInput::Population(&p), Default::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.aggregates.aggregate_vol, Some(1.0));
        assert_eq!(out.aggregates.psi, 0.0);
    }

    #[test]
    fn two_agent_example() {
        let s = SingleStockSpec::new(1.0, 1.0).unwrap();
        let p =
            Population::new(vec![s.agent(0.0, 5.0, 0.5), s.agent(0.0, 7.0, 0.5)], ModelKind::Cara).unwrap();
        let out =
            fixed_point_oracle(ModelKind::Cara, OracleInput::Population(&p), Default::default()).unwrap();
        assert!((out.aggregates.aggregate_vol.unwrap() - 12.0).abs() < 1e-12);
        assert!((out.aggregates.phi - 6.0).abs() < 1e-14);
        assert!((out.aggregates.psi - 0.5).abs() < 1e-14);
    }

    #[test]
    fn unit_slope_diverges() {
        let p = Population::new(vec![AgentType::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0)], ModelKind::Cara).unwrap();
        let opts = FixedPointOptions { max_iter: 10_000, ..Default::default() };
        match fixed_point_oracle(ModelKind::Cara, OracleInput::Population(&p), opts) {
            Err(Error::Divergent { max_iter, last }) => {
                assert_eq!(max_iter, 10_000);
                assert_eq!(last, 10_000.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crra_steep_slope_is_damped() {
        // psi = 3: the undamped map has slope -3.
        let z = AgentType::new(1.0, 4.0, 1.0, 1.0, 0.0, 1.0);
        let d = TypeDistribution::point_mass(z, ModelKind::Crra).unwrap();
        let out =
            fixed_point_oracle(ModelKind::Crra, OracleInput::Distribution(&d), Default::default()).unwrap();
        assert!(out.damping < 1.0);
        assert!((out.aggregates.aggregate_vol.unwrap() - 1.0).abs() < 1e-13);
        assert!((out.aggregates.psi - 3.0).abs() < 1e-14);
    }
}
