//! Agent types, populations and discrete type distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`TypeDistribution`].
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Exponential utility, additive competition through the arithmetic mean.
    Cara,
    /// Power/log utility, multiplicative competition through the geometric mean.
    Crra,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Cara => f.write_str("cara"),
            ModelKind::Crra => f.write_str("crra"),
        }
    }
}

/// One agent's type vector: initial wealth, risk tolerance, competition
/// weight and the drift / idiosyncratic / common volatilities of the stock
/// the agent trades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    pub x0: f64,
    pub delta: f64,
    pub theta: f64,
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
}

impl AgentType {
    pub fn new(x0: f64, delta: f64, theta: f64, mu: f64, nu: f64, sigma: f64) -> Self {
        AgentType { x0, delta, theta, mu, nu, sigma }
    }

    /// Total variance rate `sigma^2 + nu^2`.
    pub fn total_variance(&self) -> f64 {
        self.sigma * self.sigma + self.nu * self.nu
    }

    /// The no-competition optimum `delta * mu / (sigma^2 + nu^2)`: an amount for
    /// CARA, a wealth fraction for CRRA.
    pub fn merton_portfolio(&self) -> f64 {
        self.delta * self.mu / self.total_variance()
    }

    fn bits(&self) -> [u64; 6] {
        [
            self.x0.to_bits(),
            self.delta.to_bits(),
            self.theta.to_bits(),
            self.mu.to_bits(),
            self.nu.to_bits(),
            self.sigma.to_bits(),
        ]
    }
}

/// Checks the hypotheses placed on a single type vector.
pub fn validate_type(t: &AgentType, kind: ModelKind) -> Result<()> {
    let finite = [t.x0, t.delta, t.theta, t.mu, t.nu, t.sigma].iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::domain("all type parameters must be finite"));
    }
    if !(t.delta > 0.0) {
        return Err(Error::domain(format!("delta must be > 0 (got {})", t.delta)));
    }
    if !(0.0..=1.0).contains(&t.theta) {
        return Err(Error::domain(format!("theta must lie in [0,1] (got {})", t.theta)));
    }
    if !(t.mu > 0.0) {
        return Err(Error::domain(format!("mu must be > 0 (got {})", t.mu)));
    }
    if t.nu < 0.0 {
        return Err(Error::domain(format!("nu must be >= 0 (got {})", t.nu)));
    }
    if t.sigma < 0.0 {
        return Err(Error::domain(format!("sigma must be >= 0 (got {})", t.sigma)));
    }
    if !(t.sigma + t.nu > 0.0) {
        return Err(Error::domain("sigma+nu must be > 0"));
    }
    if kind == ModelKind::Crra && !(t.x0 > 0.0) {
        return Err(Error::domain(format!("x0>0 is required for CRRA (got {})", t.x0)));
    }
    Ok(())
}

/// The agents of an n-agent game, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Population {
    agents: Vec<AgentType>,
}

impl Population {
    /// Builds a population; every agent must satisfy the hypotheses of `kind`.
    pub fn new(agents: Vec<AgentType>, kind: ModelKind) -> Result<Self> {
        let p = Population { agents };
        p.validate(kind)?;
        Ok(p)
    }

    /// For agents drawn from an already validated distribution.
    pub(crate) fn from_valid_agents(agents: Vec<AgentType>) -> Self {
        Population { agents }
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::domain("a population needs at least one agent"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            validate_type(a, kind).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("agent {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn agents(&self) -> &[AgentType] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// True when every agent trades the same stock with no idiosyncratic noise.
    pub fn is_single_stock(&self) -> bool {
        let first = self.agents[0];
        self.agents.iter().all(|a| a.nu == 0.0 && a.mu == first.mu && a.sigma == first.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "type")]
    pub agent: AgentType,
    pub weight: f64,
}

/// A finite discrete law of type vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeDistribution {
    atoms: Vec<Atom>,
}

impl TypeDistribution {
    /// Weights must be strictly positive and sum to one within
    /// [`WEIGHT_SUM_TOL`]; they are never renormalized.
    pub fn new(atoms: Vec<(AgentType, f64)>, kind: ModelKind) -> Result<Self> {
        let d = TypeDistribution {
            atoms: atoms.into_iter().map(|(agent, weight)| Atom { agent, weight }).collect(),
        };
        d.validate(kind)?;
        Ok(d)
    }

    pub fn point_mass(agent: AgentType, kind: ModelKind) -> Result<Self> {
        Self::new(vec![(agent, 1.0)], kind)
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::domain("a type distribution needs at least one atom"));
        }
        let mut total = 0.0;
        for (k, atom) in self.atoms.iter().enumerate() {
            if !(atom.weight > 0.0) || !atom.weight.is_finite() {
                return Err(Error::domain(format!(
                    "atom {k}: weight must be strictly positive (got {})",
                    atom.weight
                )));
            }
            validate_type(&atom.agent, kind).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("atom {k}: {msg}")),
                other => other,
            })?;
            total += atom.weight;
        }
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::domain(format!("weights must sum to 1 (got {total})")));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_single_stock(&self) -> bool {
        let first = self.atoms[0].agent;
        self.atoms.iter().all(|a| a.agent.nu == 0.0 && a.agent.mu == first.mu && a.agent.sigma == first.sigma)
    }
}

/// Mean `mu` and common volatility `sigma` of the one stock all agents trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleStockSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl SingleStockSpec {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0) || !(sigma > 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::domain("single stock requires mu > 0 and sigma > 0"));
        }
        Ok(SingleStockSpec { mu, sigma })
    }

    /// An agent trading this stock (`nu = 0`).
    pub fn agent(&self, x0: f64, delta: f64, theta: f64) -> AgentType {
        AgentType::new(x0, delta, theta, self.mu, 0.0, self.sigma)
    }
}

/// Maps exclude-self preference parameters `(delta', theta')` (the agent
/// compares itself with the other `n - 1` agents) to the include-self
/// parameters `(delta, theta)` that give the same payoff, up to a positive
/// multiplicative constant in the CRRA case.
pub fn reparam_exclude_self(
    kind: ModelKind,
    delta_prime: f64,
    theta_prime: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::domain("exclude-self reparametrization needs n >= 2"));
    }
    if !(delta_prime > 0.0) || !delta_prime.is_finite() {
        return Err(Error::domain(format!("delta' must be > 0 (got {delta_prime})")));
    }
    if !(0.0..=1.0).contains(&theta_prime) {
        return Err(Error::domain(format!("theta' must lie in [0,1] (got {theta_prime})")));
    }
    let nf = n as f64;
    let others = nf - 1.0;
    let theta = theta_prime / (others / nf + theta_prime / nf);
    let scale = 1.0 + theta_prime / others;
    let delta = match kind {
        ModelKind::Cara => delta_prime / scale,
        ModelKind::Crra => {
            if (1.0 - 1.0 / delta_prime) * scale >= 1.0 {
                return Err(Error::domain(format!(
                    "CRRA exclude-self map requires (1-1/delta')(1+theta'/(n-1)) < 1 \
                     (delta'={delta_prime}, theta'={theta_prime}, n={n})"
                )));
            }
            delta_prime / (delta_prime - (delta_prime - 1.0) * scale)
        }
    };
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("mapped delta is not positive ({delta})")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("mapped theta {theta} falls outside [0,1]")));
    }
    Ok((delta, theta))
}

/// The empirical law of a population: distinct agents (bitwise field
/// equality, first-appearance order) weighted by multiplicity / n.
pub fn empirical_distribution(p: &Population) -> TypeDistribution {
    let n = p.len() as f64;
    let mut seen: Vec<([u64; 6], AgentType, usize)> = Vec::new();
    for a in p.agents() {
        let key = a.bits();
        match seen.iter_mut().find(|(k, _, _)| *k == key) {
            Some(entry) => entry.2 += 1,
            None => seen.push((key, *a, 1)),
        }
    }
    TypeDistribution {
        atoms: seen.into_iter().map(|(_, agent, count)| Atom { agent, weight: count as f64 / n }).collect(),
    }
}

/// `sum_k weight_k * f(atom_k)`.
pub fn expect<F>(d: &TypeDistribution, f: F) -> Result<f64>
where
    F: Fn(&AgentType) -> f64,
{
    let mut acc = 0.0;
    for (k, atom) in d.atoms().iter().enumerate() {
        let v = f(&atom.agent);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("integrand is not finite at atom {k} ({v})")));
        }
        acc += atom.weight * v;
    }
    Ok(acc)
}
