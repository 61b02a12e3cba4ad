//! Exponential utility: additive competition through the arithmetic mean of
//! terminal wealth.

use crate::error::Result;
use crate::model::{ModelKind, Population, TypeDistribution};

use super::{Aggregates, EquilibriumResult};

/// `phi_n = (1/n) sum delta mu sigma / D`, `psi_n = (1/n) sum theta sigma^2 / D`
/// with `D = sigma^2 + nu^2 (1 - theta/n)`. The aggregate volatility is left
/// empty when `|1 - psi_n| <= 1e-12`.
pub fn aggregates_n(p: &Population) -> Result<Aggregates> {
    p.validate(ModelKind::Cara)?;
    Ok(super::aggregates_n(ModelKind::Cara, p))
}

/// The unique constant Nash equilibrium, or `NoEquilibrium` when `psi_n = 1`.
pub fn solve_nash(p: &Population) -> Result<EquilibriumResult> {
    super::solve_n(ModelKind::Cara, p)
}

pub fn aggregates_mf(d: &TypeDistribution) -> Result<Aggregates> {
    d.validate(ModelKind::Cara)?;
    super::aggregates_mf(ModelKind::Cara, d)
}

/// The unique constant mean field equilibrium, one strategy per atom.
pub fn mfe(d: &TypeDistribution) -> Result<EquilibriumResult> {
    super::solve_mf(ModelKind::Cara, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::model::{AgentType, SingleStockSpec};

    fn pop(agents: Vec<AgentType>) -> Population {
        Population::new(agents, ModelKind::Cara).unwrap()
    }

    #[test]
    fn aggregates_examples() {
        let a = aggregates_n(&pop(vec![AgentType::new(0.0, 2.0, 0.0, 1.0, 1.0, 1.0)])).unwrap();
        assert_eq!((a.phi, a.psi), (1.0, 0.0));

        let s = SingleStockSpec::new(0.7, 1.3).unwrap();
        let p = pop(vec![s.agent(0.0, 2.0, 0.2), s.agent(0.0, 4.0, 0.6), s.agent(0.0, 3.0, 0.1)]);
        let a = aggregates_n(&p).unwrap();
        assert!((a.phi - 3.0 * 0.7 / 1.3).abs() < 1e-14);
        assert!((a.psi - 0.3).abs() < 1e-15);

        let a = aggregates_n(&pop(vec![AgentType::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0)])).unwrap();
        assert_eq!(a.psi, 1.0);
        assert_eq!(a.aggregate_vol, None);
    }

    #[test]
    fn two_agent_single_stock() {
        let s = SingleStockSpec::new(1.0, 1.0).unwrap();
        let r = solve_nash(&pop(vec![s.agent(0.0, 5.0, 0.5), s.agent(0.0, 7.0, 0.5)])).unwrap();
        assert!((r.strategies[0] - 11.0).abs() < 1e-12);
        assert!((r.strategies[1] - 13.0).abs() < 1e-12);
        assert!((r.aggregate_vol() - 12.0).abs() < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn no_competition_is_merton() {
        let a = AgentType::new(0.0, 2.0, 0.0, 0.3, 0.4, 0.5);
        let b = AgentType::new(0.0, 1.0, 0.9, 0.2, 0.1, 0.6);
        let r = solve_nash(&pop(vec![a, b])).unwrap();
        assert_eq!(r.strategies[0], a.merton_portfolio());
    }

    #[test]
    fn full_competition_single_stock_has_no_equilibrium() {
        let r = solve_nash(&pop(vec![AgentType::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0)]));
        assert!(matches!(r, Err(Error::NoEquilibrium { psi, .. }) if psi == 1.0));
    }

    #[test]
    fn mfe_examples() {
        let z = AgentType::new(0.0, 2.0, 0.4, 0.3, 0.5, 0.8);
        let r = mfe(&TypeDistribution::point_mass(z, ModelKind::Cara).unwrap()).unwrap();
        let expected = 2.0 * 0.3 / (0.6 * 0.64 + 0.25);
        assert!((r.strategies[0] - expected).abs() < 1e-13);

        let a = AgentType::new(0.0, 2.0, 0.4, 0.3, 0.5, 0.0);
        let b = AgentType::new(0.0, 1.0, 0.9, 0.2, 0.1, 0.0);
        let d = TypeDistribution::new(vec![(a, 0.3), (b, 0.7)], ModelKind::Cara).unwrap();
        let r = mfe(&d).unwrap();
        assert!((r.strategies[0] - 2.0 * 0.3 / 0.25).abs() < 1e-14);
        assert!((r.strategies[1] - 0.2 / 0.01).abs() < 1e-13);

        let s = SingleStockSpec::new(1.0, 1.0).unwrap();
        let d = TypeDistribution::new(
            vec![(s.agent(0.0, 5.0, 0.5), 0.5), (s.agent(0.0, 7.0, 0.5), 0.5)],
            ModelKind::Cara,
        )
        .unwrap();
        let r = mfe(&d).unwrap();
        assert!((r.strategies[0] - 11.0).abs() < 1e-12);
        assert!((r.strategies[1] - 13.0).abs() < 1e-12);
    }

    #[test]
    fn mfe_no_equilibrium() {
        let s = SingleStockSpec::new(1.0, 1.0).unwrap();
        let d = TypeDistribution::new(
            vec![(s.agent(0.0, 5.0, 1.0), 0.5), (s.agent(0.0, 7.0, 1.0), 0.5)],
            ModelKind::Cara,
        )
        .unwrap();
        assert!(matches!(mfe(&d), Err(Error::NoEquilibrium { .. })));
    }
}
