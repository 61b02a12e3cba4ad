//! Effective risk tolerance in the single-stock mean field game: the
//! equilibrium strategy of each type is the Merton portfolio of a modified
//! risk tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expect, AgentType, ModelKind, TypeDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetitionProfile {
    pub delta_eff: f64,
    /// CRRA only: `mean(delta) / (1 + E[theta (delta - 1)])`.
    pub k: Option<f64>,
    /// CRRA only, and only when `theta * mean(delta) > 1` and
    /// `mean(delta) != 1`: the average competition weight at which the
    /// sensitivity of the strategy to `delta` changes sign (assuming `delta`
    /// and `theta` are uncorrelated across the population).
    pub theta_bar_crit: Option<f64>,
}

/// Profile of `agent` against the population `d`.
///
/// CARA: `delta_eff = delta + theta mean(delta) / (1 - mean(theta))`.
/// CRRA: `delta_eff = (1 - k theta) delta + k theta`.
pub fn competition_profile(
    kind: ModelKind,
    agent: &AgentType,
    d: &TypeDistribution,
) -> Result<CompetitionProfile> {
    d.validate(kind)?;
    if !d.is_single_stock() || agent.nu != 0.0 {
        return Err(Error::domain(
            "competition profile requires a single stock (nu = 0 and common mu, sigma)",
        ));
    }
    if !(agent.delta > 0.0) || !(0.0..=1.0).contains(&agent.theta) {
        return Err(Error::domain("agent needs delta > 0 and theta in [0,1]"));
    }
    let delta_bar = expect(d, |a| a.delta)?;
    let theta_bar = expect(d, |a| a.theta)?;
    match kind {
        ModelKind::Cara => {
            if theta_bar >= 1.0 {
                return Err(Error::domain(format!(
                    "CARA competition profile needs mean theta < 1 (got {theta_bar})"
                )));
            }
            Ok(CompetitionProfile {
                delta_eff: agent.delta + agent.theta * delta_bar / (1.0 - theta_bar),
                k: None,
                theta_bar_crit: None,
            })
        }
        ModelKind::Crra => {
            let k = delta_bar / (1.0 + expect(d, |a| a.theta * (a.delta - 1.0))?);
            let theta_bar_crit = (agent.theta * delta_bar > 1.0 && delta_bar != 1.0)
                .then(|| (agent.theta * delta_bar - 1.0) / (delta_bar - 1.0));
            Ok(CompetitionProfile {
                delta_eff: (1.0 - k * agent.theta) * agent.delta + k * agent.theta,
                k: Some(k),
                theta_bar_crit,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::solve_mfe;
    use crate::model::SingleStockSpec;

    fn product_law(s: SingleStockSpec, deltas: &[f64], thetas: &[f64], kind: ModelKind) -> TypeDistribution {
        let w = 1.0 / (deltas.len() * thetas.len()) as f64;
        let atoms =
            deltas.iter().flat_map(|&d| thetas.iter().map(move |&t| (s.agent(1.0, d, t), w))).collect();
        TypeDistribution::new(atoms, kind).unwrap()
    }

    #[test]
    fn crra_k_for_uncorrelated_law() {
        let s = SingleStockSpec::new(5.0, 1.0).unwrap();
        let d = product_law(s, &[1.0, 3.0], &[0.0, 0.4], ModelKind::Crra);
        let p = competition_profile(ModelKind::Crra, &s.agent(1.0, 2.0, 0.5), &d).unwrap();
        assert_eq!(p.k, Some(5.0 / 3.0));
    }

    #[test]
    fn crra_critical_theta_bar() {
        let s = SingleStockSpec::new(5.0, 1.0).unwrap();
        let d = product_law(s, &[1.0, 3.0], &[0.25, 0.75], ModelKind::Crra);
        let p = competition_profile(ModelKind::Crra, &s.agent(1.0, 2.0, 0.75), &d).unwrap();
        assert_eq!(p.theta_bar_crit, Some(0.5));

        let p = competition_profile(ModelKind::Crra, &s.agent(1.0, 2.0, 0.25), &d).unwrap();
        assert_eq!(p.theta_bar_crit, None);
    }

    #[test]
    fn cara_without_competition() {
        let s = SingleStockSpec::new(1.0, 1.0).unwrap();
        let d = product_law(s, &[5.0, 7.0], &[0.5], ModelKind::Cara);
        let p = competition_profile(ModelKind::Cara, &s.agent(0.0, 5.0, 0.0), &d).unwrap();
        assert_eq!(p.delta_eff, 5.0);
        let p = competition_profile(ModelKind::Cara, &s.agent(0.0, 5.0, 0.5), &d).unwrap();
        assert_eq!(p.delta_eff, 11.0);

        let full = product_law(s, &[5.0], &[1.0], ModelKind::Cara);
        assert!(competition_profile(ModelKind::Cara, &s.agent(0.0, 5.0, 0.5), &full).is_err());
    }

    #[test]
    fn delta_eff_reproduces_mfe() {
        let s = SingleStockSpec::new(0.6, 0.8).unwrap();
        for kind in [ModelKind::Cara, ModelKind::Crra] {
            let d = product_law(s, &[0.5, 2.0, 4.0], &[0.1, 0.6], kind);
            let r = solve_mfe(kind, &d).unwrap();
            for (atom, pi) in d.atoms().iter().zip(&r.strategies) {
                let p = competition_profile(kind, &atom.agent, &d).unwrap();
                let merton = p.delta_eff * s.mu / (s.sigma * s.sigma);
                assert!((merton - pi).abs() < 1e-12, "{kind}: {merton} vs {pi}");
            }
        }
    }
}
