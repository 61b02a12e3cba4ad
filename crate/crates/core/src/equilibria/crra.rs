//! Power and log utility: multiplicative competition through the geometric
//! mean of terminal wealth. Strategies are fractions of wealth.

use crate::error::Result;
use crate::model::{ModelKind, Population, TypeDistribution};

use super::{Aggregates, EquilibriumResult};

/// `phi_n = (1/n) sum delta mu sigma / D`,
/// `psi_n = (1/n) sum theta (delta - 1) sigma^2 / D` with
/// `D = sigma^2 + nu^2 (1 + (delta - 1) theta / n)`.
pub fn aggregates_n(p: &Population) -> Result<Aggregates> {
    p.validate(ModelKind::Crra)?;
    Ok(super::aggregates_n(ModelKind::Crra, p))
}

/// The unique constant Nash equilibrium; `1 + psi_n > 0` always holds so
/// there is no failure branch beyond invalid input.
pub fn solve_nash(p: &Population) -> Result<EquilibriumResult> {
    super::solve_n(ModelKind::Crra, p)
}

pub fn aggregates_mf(d: &TypeDistribution) -> Result<Aggregates> {
    d.validate(ModelKind::Crra)?;
    super::aggregates_mf(ModelKind::Crra, d)
}

pub fn mfe(d: &TypeDistribution) -> Result<EquilibriumResult> {
    super::solve_mf(ModelKind::Crra, d)
}
