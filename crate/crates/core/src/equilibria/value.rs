//! Equilibrium value functions.
//!
//! In every setting the value function of an agent facing constant
//! strategies of the others is separable in time with a constant growth
//! exponent `rho`:
//!
//! * CARA, n agents: `v = -exp(-((1 - theta/n) x - theta y) / delta - rho (T - t))`
//!   with `y` the sum of the other agents' wealths divided by `n`.
//! * CARA, mean field: `v = -exp(-(x - theta m) / delta - rho (T - t))`.
//! * CRRA, n agents, `delta != 1`: `v = (1/p) (x^a y^-theta)^p exp(p rho (T - t))`
//!   with `p = 1 - 1/delta`, `a = 1 - theta/n` and `y` the product of the
//!   other agents' wealths raised to `1/n`; for `delta = 1`,
//!   `v = a log x - theta log y + rho (T - t)`.
//! * CRRA, mean field: the same with `a = 1` and `y` the geometric mean.
//!
//! For CRRA `rho` is the growth rate of the certainty equivalent, so the
//! log branch is the `delta -> 1` limit of the power branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expect, AgentType, ModelKind, Population, TypeDistribution};

use super::{EquilibriumResult, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSetting {
    CaraN,
    CaraMf,
    CrraNPower,
    CrraNLog,
    CrraMfPower,
    CrraMfLog,
}

impl ValueSetting {
    /// The branch that applies to `agent`; CRRA log is chosen exactly when
    /// `delta == 1`.
    pub fn select(kind: ModelKind, setting: Setting, agent: &AgentType) -> Self {
        let log = agent.delta == 1.0;
        match (kind, setting, log) {
            (ModelKind::Cara, Setting::NAgent, _) => ValueSetting::CaraN,
            (ModelKind::Cara, Setting::MeanField, _) => ValueSetting::CaraMf,
            (ModelKind::Crra, Setting::NAgent, false) => ValueSetting::CrraNPower,
            (ModelKind::Crra, Setting::NAgent, true) => ValueSetting::CrraNLog,
            (ModelKind::Crra, Setting::MeanField, false) => ValueSetting::CrraMfPower,
            (ModelKind::Crra, Setting::MeanField, true) => ValueSetting::CrraMfLog,
        }
    }

    pub fn kind(self) -> ModelKind {
        match self {
            ValueSetting::CaraN | ValueSetting::CaraMf => ModelKind::Cara,
            _ => ModelKind::Crra,
        }
    }

    pub fn setting(self) -> Setting {
        match self {
            ValueSetting::CaraN | ValueSetting::CrraNPower | ValueSetting::CrraNLog => Setting::NAgent,
            _ => Setting::MeanField,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueExponent {
    pub rho: f64,
    pub setting: ValueSetting,
}

/// Averages over the other agents `k != i`, each divided by `n` (not `n - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HatQuantities {
    pub n: usize,
    /// `(1/n) sum mu_k alpha_k`
    pub mu_alpha: f64,
    /// `(1/n) sum sigma_k alpha_k`
    pub sigma_alpha: f64,
    /// `(1/n) sum (sigma_k^2 + nu_k^2) alpha_k^2`
    pub total_var_alpha: f64,
    /// `(1/n) sum nu_k^2 alpha_k^2`
    pub nu2_alpha: f64,
    /// Drift rate of `y` in the CRRA game (relative to `y`).
    pub eta: f64,
}

impl HatQuantities {
    /// Variance rate of the others' aggregate (`y` for CARA, `log y` for CRRA).
    pub fn others_variance(&self) -> f64 {
        self.sigma_alpha * self.sigma_alpha + self.nu2_alpha / self.n as f64
    }
}

pub fn hat_quantities(p: &Population, strategies: &[f64], i: usize) -> Result<HatQuantities> {
    let n = p.len();
    if strategies.len() != n {
        return Err(Error::domain(format!("expected {n} strategies, got {}", strategies.len())));
    }
    if i >= n {
        return Err(Error::domain(format!("agent index {i} out of range for n={n}")));
    }
    let nf = n as f64;
    let (mut mu_a, mut sig_a, mut tot_a, mut nu_a) = (0.0, 0.0, 0.0, 0.0);
    for (k, (a, &alpha)) in p.agents().iter().zip(strategies).enumerate() {
        if k == i {
            continue;
        }
        mu_a += a.mu * alpha;
        sig_a += a.sigma * alpha;
        tot_a += a.total_variance() * alpha * alpha;
        nu_a += a.nu * a.nu * alpha * alpha;
    }
    let (mu_alpha, sigma_alpha, total_var_alpha, nu2_alpha) = (mu_a / nf, sig_a / nf, tot_a / nf, nu_a / nf);
    let eta = mu_alpha - 0.5 * (total_var_alpha - sigma_alpha * sigma_alpha - nu2_alpha / nf);
    Ok(HatQuantities { n, mu_alpha, sigma_alpha, total_var_alpha, nu2_alpha, eta })
}

/// Population moments of a mean field equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldMoments {
    /// `E[sigma pi]`
    pub aggregate_vol: f64,
    /// `E[mu pi]`
    pub mean_mu_pi: f64,
    /// `E[(sigma^2 + nu^2) pi^2]`
    pub mean_var_pi2: f64,
    /// `E[theta mu sigma / (sigma^2 + nu^2)]`
    pub phi_tilde: f64,
    /// `E[delta mu^2 / (sigma^2 + nu^2)]`
    pub psi_tilde: f64,
    /// `E[mu pi] - (E[(sigma^2 + nu^2) pi^2] - E[sigma pi]^2) / 2`, the drift
    /// of the geometric mean of wealth relative to itself.
    pub eta: f64,
    /// `E[x0]`
    pub mean_x0: f64,
    /// `E[log x0]`; only meaningful when every `x0 > 0`.
    pub mean_log_x0: Option<f64>,
}

pub fn mean_field_moments(d: &TypeDistribution, strategies: &[f64]) -> Result<MeanFieldMoments> {
    if strategies.len() != d.len() {
        return Err(Error::domain(format!("expected {} strategies, got {}", d.len(), strategies.len())));
    }
    let mut acc = [0.0; 6];
    for (atom, &pi) in d.atoms().iter().zip(strategies) {
        let a = &atom.agent;
        let w = atom.weight;
        let tv = a.total_variance();
        acc[0] += w * a.sigma * pi;
        acc[1] += w * a.mu * pi;
        acc[2] += w * tv * pi * pi;
        acc[3] += w * a.theta * a.mu * a.sigma / tv;
        acc[4] += w * a.delta * a.mu * a.mu / tv;
        acc[5] += w * a.x0;
    }
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("mean field moments are not finite".into()));
    }
    let mean_log_x0 =
        if d.atoms().iter().all(|a| a.agent.x0 > 0.0) { Some(expect(d, |a| a.x0.ln())?) } else { None };
    let [aggregate_vol, mean_mu_pi, mean_var_pi2, phi_tilde, psi_tilde, mean_x0] = acc;
    Ok(MeanFieldMoments {
        aggregate_vol,
        mean_mu_pi,
        mean_var_pi2,
        phi_tilde,
        psi_tilde,
        eta: mean_mu_pi - 0.5 * (mean_var_pi2 - aggregate_vol * aggregate_vol),
        mean_x0,
        mean_log_x0,
    })
}

#[derive(Debug, Clone, Copy)]
pub enum ValueContext<'a> {
    NAgent(&'a HatQuantities),
    MeanField(&'a MeanFieldMoments),
}

/// `rho` of `agent` in the requested branch.
pub fn value_exponent(
    kind: ModelKind,
    setting: ValueSetting,
    agent: &AgentType,
    ctx: ValueContext<'_>,
) -> Result<ValueExponent> {
    if setting.kind() != kind {
        return Err(Error::domain(format!("value branch {setting:?} does not belong to {kind}")));
    }
    let log = agent.delta == 1.0;
    match setting {
        ValueSetting::CrraNLog | ValueSetting::CrraMfLog if !log => {
            return Err(Error::domain(format!("log branch requires delta = 1 (got {})", agent.delta)))
        }
        ValueSetting::CrraNPower | ValueSetting::CrraMfPower if log => {
            return Err(Error::domain("power branch requires delta != 1"))
        }
        _ => {}
    }

    let AgentType { delta, theta, mu, sigma, .. } = *agent;
    let tv = agent.total_variance();
    let rho = match (setting, ctx) {
        (ValueSetting::CaraN, ValueContext::NAgent(h)) => {
            let c = theta / delta;
            let lead = mu + c * sigma * h.sigma_alpha;
            lead * lead / (2.0 * tv) - c * h.mu_alpha - 0.5 * c * c * h.others_variance()
        }
        (ValueSetting::CaraMf, ValueContext::MeanField(m)) => {
            let c = theta / delta;
            let s = m.aggregate_vol;
            let lead = mu + c * sigma * s;
            // psi_tilde + phi_tilde * s is the drift E[mu pi] of the mean wealth.
            lead * lead / (2.0 * tv) - c * (m.psi_tilde + m.phi_tilde * s) - 0.5 * (c * s).powi(2)
        }
        (ValueSetting::CrraNPower, ValueContext::NAgent(h)) => {
            let p = 1.0 - 1.0 / delta;
            let a = 1.0 - theta / h.n as f64;
            let q = h.others_variance();
            let lead = a * (mu - p * theta * sigma * h.sigma_alpha);
            lead * lead / (2.0 * a * tv * (1.0 - a * p)) - theta * h.eta + 0.5 * q * theta * (1.0 + p * theta)
        }
        (ValueSetting::CrraNLog, ValueContext::NAgent(h)) => {
            let a = 1.0 - theta / h.n as f64;
            a * mu * mu / (2.0 * tv) - theta * h.eta + 0.5 * theta * h.others_variance()
        }
        (ValueSetting::CrraMfPower, ValueContext::MeanField(m)) => {
            let p = 1.0 - 1.0 / delta;
            let s = m.aggregate_vol;
            let lead = delta * mu - theta * (delta - 1.0) * sigma * s;
            lead * lead / (2.0 * tv * delta) - theta * m.eta + 0.5 * theta * s * s * (1.0 + p * theta)
        }
        (ValueSetting::CrraMfLog, ValueContext::MeanField(m)) => {
            let s = m.aggregate_vol;
            mu * mu / (2.0 * tv) - theta * m.eta + 0.5 * theta * s * s
        }
        (setting, _) => {
            return Err(Error::domain(format!("context does not match value branch {setting:?}")))
        }
    };
    if !rho.is_finite() {
        return Err(Error::Numeric(format!("value exponent is not finite ({rho})")));
    }
    Ok(ValueExponent { rho, setting })
}

/// Exponents of every agent of a solved n-agent game.
pub fn nash_value_exponents(p: &Population, eq: &EquilibriumResult) -> Result<Vec<ValueExponent>> {
    if eq.setting != Setting::NAgent {
        return Err(Error::domain("expected an n-agent equilibrium"));
    }
    (0..p.len())
        .map(|i| {
            let h = hat_quantities(p, &eq.strategies, i)?;
            let a = &p.agents()[i];
            value_exponent(
                eq.kind,
                ValueSetting::select(eq.kind, Setting::NAgent, a),
                a,
                ValueContext::NAgent(&h),
            )
        })
        .collect()
}

/// Exponents of every atom of a solved mean field game.
pub fn mfe_value_exponents(d: &TypeDistribution, eq: &EquilibriumResult) -> Result<Vec<ValueExponent>> {
    if eq.setting != Setting::MeanField {
        return Err(Error::domain("expected a mean field equilibrium"));
    }
    let m = mean_field_moments(d, &eq.strategies)?;
    d.atoms()
        .iter()
        .map(|atom| {
            let a = &atom.agent;
            value_exponent(
                eq.kind,
                ValueSetting::select(eq.kind, Setting::MeanField, a),
                a,
                ValueContext::MeanField(&m),
            )
        })
        .collect()
}

fn crra_value(a: f64, theta: f64, delta: f64, log_x: f64, log_y: f64, rho: f64, tau: f64) -> f64 {
    if delta == 1.0 {
        a * log_x - theta * log_y + rho * tau
    } else {
        let p = 1.0 - 1.0 / delta;
        (p * (a * log_x - theta * log_y + rho * tau)).exp() / p
    }
}

/// Equilibrium value of agent `i` at time 0 and initial wealths.
pub fn nash_value(
    kind: ModelKind,
    p: &Population,
    i: usize,
    rho: &ValueExponent,
    horizon: f64,
) -> Result<f64> {
    let n = p.len();
    if i >= n {
        return Err(Error::domain(format!("agent index {i} out of range for n={n}")));
    }
    if rho.setting.kind() != kind || rho.setting.setting() != Setting::NAgent {
        return Err(Error::domain("value exponent does not belong to this n-agent game"));
    }
    let nf = n as f64;
    let a = &p.agents()[i];
    let share = 1.0 - a.theta / nf;
    match kind {
        ModelKind::Cara => {
            let y: f64 =
                p.agents().iter().enumerate().filter(|(k, _)| *k != i).map(|(_, b)| b.x0).sum::<f64>() / nf;
            Ok(-(-(share * a.x0 - a.theta * y) / a.delta - rho.rho * horizon).exp())
        }
        ModelKind::Crra => {
            p.validate(kind)?;
            let log_y: f64 =
                p.agents().iter().enumerate().filter(|(k, _)| *k != i).map(|(_, b)| b.x0.ln()).sum::<f64>()
                    / nf;
            Ok(crra_value(share, a.theta, a.delta, a.x0.ln(), log_y, rho.rho, horizon))
        }
    }
}

/// Equilibrium value at time 0 of a representative agent of type `agent`.
pub fn mfe_value(
    kind: ModelKind,
    agent: &AgentType,
    moments: &MeanFieldMoments,
    rho: &ValueExponent,
    horizon: f64,
) -> Result<f64> {
    if rho.setting.kind() != kind || rho.setting.setting() != Setting::MeanField {
        return Err(Error::domain("value exponent does not belong to this mean field game"));
    }
    match kind {
        ModelKind::Cara => {
            Ok(-(-(agent.x0 - agent.theta * moments.mean_x0) / agent.delta - rho.rho * horizon).exp())
        }
        ModelKind::Crra => {
            let log_y =
                moments.mean_log_x0.ok_or_else(|| Error::domain("CRRA requires x0 > 0 on every atom"))?;
            if !(agent.x0 > 0.0) {
                return Err(Error::domain("x0>0 is required for CRRA"));
            }
            Ok(crra_value(1.0, agent.theta, agent.delta, agent.x0.ln(), log_y, rho.rho, horizon))
        }
    }
}

/// `U(x, m, t) = -exp(-(x - theta m) / delta - rho (T - t))`, the CARA mean
/// field value as a function of own wealth and mean population wealth.
pub fn master_value(
    x: f64,
    m_bar: f64,
    t: f64,
    horizon: f64,
    agent: &AgentType,
    rho: &ValueExponent,
) -> Result<f64> {
    if rho.setting != ValueSetting::CaraMf {
        return Err(Error::domain("master value is defined for the CARA mean field game only"));
    }
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::domain(format!("t={t} outside [0, {horizon}]")));
    }
    Ok(-(-(x - agent.theta * m_bar) / agent.delta - rho.rho * (horizon - t)).exp())
}
