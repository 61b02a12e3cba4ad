//! Two-parameter grids of the single-stock mean field strategy.
//!
//! Each cell builds a point-mass population law at `(delta_bar, theta_bar)`
//! with the common `(mu, sigma)` and reports the equilibrium strategy of the
//! representative type `(delta, theta)`. In the single-stock case the
//! aggregate depends on the law only through `E[delta]`, `E[theta]` and
//! `E[theta (delta - 1)]`, so the point mass stands in for any law with
//! uncorrelated `delta` and `theta` and those means.

use serde::{Deserialize, Serialize};

use relperf_core::equilibria::{mfe_strategy, solve_mfe};
use relperf_core::exec::{map_indexed, ExecMode};
use relperf_core::{AgentType, Error, ModelKind, TypeDistribution};

use crate::error::{CliError, Result};
use crate::report::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Delta,
    Theta,
    DeltaBar,
    ThetaBar,
    Mu,
    Sigma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::Theta => "theta",
            SweepParam::DeltaBar => "delta_bar",
            SweepParam::ThetaBar => "theta_bar",
            SweepParam::Mu => "mu",
            SweepParam::Sigma => "sigma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: SweepParam,
    pub min: f64,
    pub max: f64,
    /// Grid size, endpoints included; at least 2.
    pub points: usize,
}

impl Axis {
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub delta: f64,
    pub theta: f64,
    pub delta_bar: f64,
    pub theta_bar: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl SweepBase {
    fn with(mut self, p: SweepParam, v: f64) -> Self {
        match p {
            SweepParam::Delta => self.delta = v,
            SweepParam::Theta => self.theta = v,
            SweepParam::DeltaBar => self.delta_bar = v,
            SweepParam::ThetaBar => self.theta_bar = v,
            SweepParam::Mu => self.mu = v,
            SweepParam::Sigma => self.sigma = v,
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub x: Axis,
    pub y: Axis,
    pub base: SweepBase,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        for a in [&self.x, &self.y] {
            if a.points < 2 || !a.min.is_finite() || !a.max.is_finite() || !(a.min < a.max) {
                return Err(CliError::Config(format!(
                    "sweep axis {} needs min < max and points >= 2",
                    a.name.name()
                )));
            }
        }
        if self.x.name == self.y.name {
            return Err(CliError::Config("sweep axes must name different parameters".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.points * self.y.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Built-in figure parameterizations.
///
/// * `fig1`: CARA, strategy over `(theta, theta_bar)` with `delta = 5`,
///   `delta_bar = 6`, `mu = sigma = 1`. The `theta_bar` grid stops at 0.95
///   to stay inside the existence region `theta_bar < 1`.
/// * `fig2`: CRRA, strategy over `(delta, theta_bar)` with `theta = 3/4`,
///   `delta_bar = 2`, `mu = 5`, `sigma = 1`; the slope in `delta` changes
///   sign at `theta_bar = 1/2`.
/// * `fig3`: CRRA, strategy over `(delta, theta)` with `theta_bar = 1/5`,
///   `delta_bar = 2`, `mu = 5`, `sigma = 1`, so that `k = 5/3`.
pub fn preset(name: &str) -> Result<(ModelKind, SweepSpec)> {
    let axis = |name, min, max, points| Axis { name, min, max, points };
    match name {
        "fig1" => Ok((
            ModelKind::Cara,
            SweepSpec {
                x: axis(SweepParam::Theta, 0.0, 1.0, 21),
                y: axis(SweepParam::ThetaBar, 0.0, 0.95, 20),
                base: SweepBase {
                    delta: 5.0,
                    theta: 0.0,
                    delta_bar: 6.0,
                    theta_bar: 0.0,
                    mu: 1.0,
                    sigma: 1.0,
                },
            },
        )),
        "fig2" => Ok((
            ModelKind::Crra,
            SweepSpec {
                x: axis(SweepParam::Delta, 0.5, 4.0, 36),
                y: axis(SweepParam::ThetaBar, 0.0, 1.0, 21),
                base: SweepBase {
                    delta: 1.0,
                    theta: 0.75,
                    delta_bar: 2.0,
                    theta_bar: 0.0,
                    mu: 5.0,
                    sigma: 1.0,
                },
            },
        )),
        "fig3" => Ok((
            ModelKind::Crra,
            SweepSpec {
                x: axis(SweepParam::Delta, 0.5, 4.0, 36),
                y: axis(SweepParam::Theta, 0.0, 1.0, 21),
                base: SweepBase {
                    delta: 1.0,
                    theta: 0.0,
                    delta_bar: 2.0,
                    theta_bar: 0.2,
                    mu: 5.0,
                    sigma: 1.0,
                },
            },
        )),
        other => Err(CliError::Config(format!("unknown preset {other:?} (fig1, fig2, fig3)"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellFlag {
    NoEquilibrium,
    InvalidParameters,
}

impl CellFlag {
    pub fn name(self) -> &'static str {
        match self {
            CellFlag::NoEquilibrium => "no_equilibrium",
            CellFlag::InvalidParameters => "invalid_parameters",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub x: f64,
    pub y: f64,
    pub pi_star: Option<f64>,
    pub flag: Option<CellFlag>,
}

/// Strategy of the representative type against the point-mass law.
pub fn cell_strategy(kind: ModelKind, b: &SweepBase) -> relperf_core::Result<f64> {
    let background = AgentType::new(1.0, b.delta_bar, b.theta_bar, b.mu, 0.0, b.sigma);
    let d = TypeDistribution::point_mass(background, kind)?;
    let eq = solve_mfe(kind, &d)?;
    let agent = AgentType::new(1.0, b.delta, b.theta, b.mu, 0.0, b.sigma);
    relperf_core::model::validate_type(&agent, kind)?;
    Ok(mfe_strategy(kind, &agent, eq.aggregate_vol()))
}

/// Evaluates every cell; rows are in x-major grid order.
pub fn run_sweep(kind: ModelKind, spec: &SweepSpec, exec: ExecMode) -> Result<Vec<SweepCell>> {
    spec.validate()?;
    let ny = spec.y.points;
    Ok(map_indexed(exec, spec.len(), |k| {
        let (x, y) = (spec.x.value(k / ny), spec.y.value(k % ny));
        let b = spec.base.with(spec.x.name, x).with(spec.y.name, y);
        match cell_strategy(kind, &b) {
            Ok(pi) => SweepCell { x, y, pi_star: Some(pi), flag: None },
            Err(Error::NoEquilibrium { .. }) => {
                SweepCell { x, y, pi_star: None, flag: Some(CellFlag::NoEquilibrium) }
            }
            Err(_) => SweepCell { x, y, pi_star: None, flag: Some(CellFlag::InvalidParameters) },
        }
    }))
}

pub fn to_csv(spec: &SweepSpec, cells: &[SweepCell]) -> String {
    let mut out = format!("{},{},pi_star,flag\n", spec.x.name.name(), spec.y.name.name());
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(c.x),
            fmt_f64(c.y),
            c.pi_star.map(fmt_f64).unwrap_or_default(),
            c.flag.map(CellFlag::name).unwrap_or_default()
        ));
    }
    out
}
