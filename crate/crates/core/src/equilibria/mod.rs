//! Closed-form constant Nash equilibria (n agents) and constant mean field
//! equilibria for the CARA and CRRA models.
//!
//! Every equilibrium strategy has the shape
//!
//! ```text
//! pi_i = (delta_i mu_i + kappa_i sigma_i s) / D_i
//! ```
//!
//! where `s` is the aggregate volatility of wealth (`phi / (1 - psi)` for
//! CARA, `phi / (1 + psi)` for CRRA), `kappa_i` is `theta_i` (CARA) or
//! `-theta_i (delta_i - 1)` (CRRA) and `D_i` is `sigma_i^2 + nu_i^2` up to
//! the finite-population correction of the idiosyncratic variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentType, ModelKind, Population, TypeDistribution};

pub mod cara;
pub mod crra;
pub mod oracle;
pub mod profile;
pub mod value;

pub use oracle::{fixed_point_oracle, FixedPointOptions, FixedPointOutcome, OracleInput};
pub use profile::{competition_profile, CompetitionProfile};
pub use value::{
    hat_quantities, master_value, mean_field_moments, mfe_value, mfe_value_exponents, nash_value,
    nash_value_exponents, value_exponent, HatQuantities, MeanFieldMoments, ValueContext, ValueExponent,
    ValueSetting,
};

/// `|1 - psi|` at or below this is treated as the no-equilibrium case.
pub const NO_EQUILIBRIUM_TOL: f64 = 1e-12;
/// Below this (and above [`NO_EQUILIBRIUM_TOL`]) a solve succeeds with an
/// ill-conditioning warning.
pub const ILL_CONDITIONED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    NAgent,
    MeanField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub phi: f64,
    pub psi: f64,
    /// `phi / (1 - psi)` (CARA) or `phi / (1 + psi)` (CRRA); absent for CARA
    /// when `psi` is numerically 1.
    pub aggregate_vol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The aggregate equation is nearly singular.
    IllConditioned { condition_number: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub kind: ModelKind,
    pub setting: Setting,
    /// One strategy per agent (n-agent) or per atom (mean field).
    pub strategies: Vec<f64>,
    /// The `delta mu / D` part of each strategy; the remainder is the
    /// competition component.
    pub merton_components: Vec<f64>,
    pub aggregates: Aggregates,
    pub warnings: Vec<Warning>,
}

impl EquilibriumResult {
    /// Aggregate volatility; always present on a solved equilibrium.
    pub fn aggregate_vol(&self) -> f64 {
        self.aggregates.aggregate_vol.expect("solved equilibrium carries its aggregate volatility")
    }

    pub fn competition_components(&self) -> Vec<f64> {
        self.strategies.iter().zip(&self.merton_components).map(|(p, m)| p - m).collect()
    }
}

/// How `theta` enters the best response of each model.
pub(crate) fn competition_sensitivity(kind: ModelKind, a: &AgentType) -> f64 {
    match kind {
        ModelKind::Cara => a.theta,
        ModelKind::Crra => -a.theta * (a.delta - 1.0),
    }
}

/// Strategy denominator; `n = None` is the mean field limit.
pub(crate) fn denominator(kind: ModelKind, a: &AgentType, n: Option<usize>) -> f64 {
    let s2 = a.sigma * a.sigma;
    let v2 = a.nu * a.nu;
    match n {
        None => s2 + v2,
        Some(n) => {
            let nf = n as f64;
            match kind {
                ModelKind::Cara => s2 + v2 * (1.0 - a.theta / nf),
                ModelKind::Crra => s2 + v2 * (1.0 + (a.delta - 1.0) * a.theta / nf),
            }
        }
    }
}

/// `(phi, psi)` for one agent/atom before averaging.
pub(crate) fn aggregate_terms(kind: ModelKind, a: &AgentType, n: Option<usize>) -> (f64, f64) {
    let d = denominator(kind, a, n);
    let phi = a.delta * a.mu * a.sigma / d;
    let psi = match kind {
        ModelKind::Cara => a.theta * a.sigma * a.sigma / d,
        ModelKind::Crra => a.theta * (a.delta - 1.0) * a.sigma * a.sigma / d,
    };
    (phi, psi)
}

/// Solves the scalar aggregate equation and collects warnings.
pub(crate) fn aggregate_vol(kind: ModelKind, phi: f64, psi: f64) -> Result<(f64, Vec<Warning>)> {
    let gap = match kind {
        ModelKind::Cara => 1.0 - psi,
        ModelKind::Crra => 1.0 + psi,
    };
    if kind == ModelKind::Cara && gap.abs() <= NO_EQUILIBRIUM_TOL {
        return Err(Error::NoEquilibrium { phi, psi });
    }
    if !(gap > 0.0) {
        // CARA with psi > 1 cannot arise from valid inputs (psi <= max theta <= 1);
        // CRRA always has 1 + psi > 0.
        return Err(Error::Numeric(format!("aggregate equation has nonpositive gap {gap}")));
    }
    let mut warnings = Vec::new();
    if gap < ILL_CONDITIONED_TOL {
        warnings.push(Warning::IllConditioned { condition_number: 1.0 / gap });
    }
    Ok((phi / gap, warnings))
}

fn build(
    kind: ModelKind,
    setting: Setting,
    agents: impl Iterator<Item = AgentType> + Clone,
    n: Option<usize>,
    phi: f64,
    psi: f64,
) -> Result<EquilibriumResult> {
    let (s, warnings) = aggregate_vol(kind, phi, psi)?;
    let mut strategies = Vec::new();
    let mut merton_components = Vec::new();
    for a in agents {
        let d = denominator(kind, &a, n);
        let merton = a.delta * a.mu / d;
        strategies.push((a.delta * a.mu + competition_sensitivity(kind, &a) * a.sigma * s) / d);
        merton_components.push(merton);
    }
    Ok(EquilibriumResult {
        kind,
        setting,
        strategies,
        merton_components,
        aggregates: Aggregates { phi, psi, aggregate_vol: Some(s) },
        warnings,
    })
}

pub(crate) fn aggregates_n(kind: ModelKind, p: &Population) -> Aggregates {
    let n = p.len();
    let (mut phi, mut psi) = (0.0, 0.0);
    for a in p.agents() {
        let (f, s) = aggregate_terms(kind, a, Some(n));
        phi += f;
        psi += s;
    }
    phi /= n as f64;
    psi /= n as f64;
    let aggregate_vol = aggregate_vol(kind, phi, psi).ok().map(|(s, _)| s);
    Aggregates { phi, psi, aggregate_vol }
}

pub(crate) fn solve_n(kind: ModelKind, p: &Population) -> Result<EquilibriumResult> {
    p.validate(kind)?;
    let agg = aggregates_n(kind, p);
    build(kind, Setting::NAgent, p.agents().iter().copied(), Some(p.len()), agg.phi, agg.psi)
}

pub(crate) fn aggregates_mf(kind: ModelKind, d: &TypeDistribution) -> Result<Aggregates> {
    let phi = crate::model::expect(d, |a| aggregate_terms(kind, a, None).0)?;
    let psi = crate::model::expect(d, |a| aggregate_terms(kind, a, None).1)?;
    let aggregate_vol = aggregate_vol(kind, phi, psi).ok().map(|(s, _)| s);
    Ok(Aggregates { phi, psi, aggregate_vol })
}

pub(crate) fn solve_mf(kind: ModelKind, d: &TypeDistribution) -> Result<EquilibriumResult> {
    d.validate(kind)?;
    let agg = aggregates_mf(kind, d)?;
    build(kind, Setting::MeanField, d.atoms().iter().map(|a| a.agent), None, agg.phi, agg.psi)
}

/// Constant Nash equilibrium of the n-agent game of either model.
pub fn solve_nash(kind: ModelKind, p: &Population) -> Result<EquilibriumResult> {
    match kind {
        ModelKind::Cara => cara::solve_nash(p),
        ModelKind::Crra => crra::solve_nash(p),
    }
}

/// Constant mean field equilibrium of either model.
pub fn solve_mfe(kind: ModelKind, d: &TypeDistribution) -> Result<EquilibriumResult> {
    match kind {
        ModelKind::Cara => cara::mfe(d),
        ModelKind::Crra => crra::mfe(d),
    }
}

/// Mean field equilibrium strategy of an arbitrary type (in or out of the
/// support of the distribution) given the equilibrium aggregate volatility.
pub fn mfe_strategy(kind: ModelKind, agent: &AgentType, aggregate_vol: f64) -> f64 {
    let d = denominator(kind, agent, None);
    (agent.delta * agent.mu + competition_sensitivity(kind, agent) * agent.sigma * aggregate_vol) / d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ill_conditioning_band() {
        assert!(matches!(aggregate_vol(ModelKind::Cara, 1.0, 1.0 - 1e-13), Err(Error::NoEquilibrium { .. })));
        let (s, w) = aggregate_vol(ModelKind::Cara, 1.0, 1.0 - 1e-8).unwrap();
        assert!((s - 1e8).abs() < 1.0);
        match &w[..] {
            [Warning::IllConditioned { condition_number }] => {
                assert!((condition_number - 1e8).abs() / 1e8 < 1e-6)
            }
            other => panic!("unexpected warnings {other:?}"),
        }
        let (_, w) = aggregate_vol(ModelKind::Cara, 1.0, 0.5).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn mfe_strategy_matches_solver_on_support() {
        let a = AgentType::new(1.0, 2.0, 0.3, 0.4, 0.2, 0.3);
        let b = AgentType::new(1.0, 0.7, 0.9, 0.2, 0.1, 0.5);
        for kind in [ModelKind::Cara, ModelKind::Crra] {
            let d = TypeDistribution::new(vec![(a, 0.25), (b, 0.75)], kind).unwrap();
            let r = solve_mfe(kind, &d).unwrap();
            assert_eq!(mfe_strategy(kind, &a, r.aggregate_vol()), r.strategies[0]);
            assert_eq!(mfe_strategy(kind, &b, r.aggregate_vol()), r.strategies[1]);
        }
    }
}
