//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": "cara",
//!   "setting": "n_agent",
//!   "population": [{"x0": 0, "delta": 5, "theta": 0.5, "mu": 1, "nu": 0, "sigma": 1}],
//!   "horizon": 1.0,
//!   "simulation": {"num_paths": 10000, "seed": "42"},
//!   "sweep": {"x": {"name": "theta", "min": 0, "max": 1, "points": 21},
//!             "y": {"name": "theta_bar", "min": 0, "max": 0.95, "points": 20},
//!             "base": {"delta": 5, "theta": 0, "delta_bar": 6, "theta_bar": 0, "mu": 1, "sigma": 1}},
//!   "convergence": {"mode": "replicated_type", "n_list": [8, 16, 32], "replications": 1},
//!   "verify": {"tolerance": 1e-6, "consistency_draws": 4},
//!   "output": {"dir": "out"}
//! }
//! ```
//!
//! `population`, `distribution` and `strategies` accept either the inline
//! value or `{"file": "path"}`, resolved relative to the config file.
//! Distributions are lists of `{"type": {...}, "weight": w}`. Seeds are
//! decimal strings (plain integers are accepted too).

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use relperf_core::convergence::ConvergenceMode;
use relperf_core::equilibria::Setting;
use relperf_core::model::{empirical_distribution, Atom};
use relperf_core::simulation::SimConfig;
use relperf_core::{AgentType, ModelKind, Population, TypeDistribution};

use crate::error::{CliError, Result};
use crate::sweep::SweepSpec;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Source<T> {
    File { file: PathBuf },
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Seed {
    Text(String),
    Number(u64),
}

impl Seed {
    pub fn value(&self) -> Result<u64> {
        match self {
            Seed::Number(n) => Ok(*n),
            Seed::Text(s) => {
                s.trim().parse().map_err(|_| CliError::Config(format!("seed {s:?} is not a decimal u64")))
            }
        }
    }
}

impl Default for Seed {
    fn default() -> Self {
        Seed::Text("0".into())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default = "default_paths")]
    pub num_paths: usize,
    #[serde(default)]
    pub seed: Seed,
    #[serde(default = "default_agents")]
    pub num_agents_sampled: usize,
    #[serde(default = "default_steps")]
    pub time_steps: usize,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        SimulationBlock {
            num_paths: default_paths(),
            seed: Seed::default(),
            num_agents_sampled: default_agents(),
            time_steps: default_steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub mode: ConvergenceMode,
    pub n_list: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Largest accepted `|argmax - strategy|`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Common-noise draws of the mean field consistency check.
    #[serde(default = "default_draws")]
    pub consistency_draws: usize,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock { tolerance: default_tolerance(), consistency_draws: default_draws() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    /// Inferred from which of `population` / `distribution` is present when
    /// omitted. `mean_field` with a population uses its empirical law.
    pub setting: Option<Setting>,
    pub population: Option<Source<Vec<AgentType>>>,
    pub distribution: Option<Source<Vec<Atom>>>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub simulation: SimulationBlock,
    pub sweep: Option<SweepSpec>,
    pub convergence: Option<ConvergenceBlock>,
    /// Strategy profile to verify instead of the closed form.
    pub strategies: Option<Source<Vec<f64>>>,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Directory that relative `file` sources are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_paths() -> usize {
    10_000
}
fn default_agents() -> usize {
    10_000
}
fn default_steps() -> usize {
    1
}
fn default_replications() -> usize {
    1
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_draws() -> usize {
    4
}
fn default_horizon() -> f64 {
    1.0
}

/// A validated instance: the n-agent population or the type distribution.
#[derive(Debug, Clone)]
pub enum Instance {
    NAgent(Population),
    MeanField(TypeDistribution),
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn parse<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_file(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = parse(text, "config")?;
        if cfg.population.is_some() && cfg.distribution.is_some() {
            return Err(CliError::Config("config must not give both population and distribution".into()));
        }
        if !(cfg.horizon > 0.0) || !cfg.horizon.is_finite() {
            return Err(CliError::Config(format!("horizon must be > 0 (got {})", cfg.horizon)));
        }
        if !(cfg.verify.tolerance > 0.0) {
            return Err(CliError::Config("verify.tolerance must be > 0".into()));
        }
        Ok(cfg)
    }

    fn resolve<T: DeserializeOwned + Clone>(&self, s: &Source<T>, what: &str) -> Result<T> {
        match s {
            Source::Inline(v) => Ok(v.clone()),
            Source::File { file } => parse(&read_file(&self.base_dir.join(file))?, what),
        }
    }

    pub fn setting(&self) -> Result<Setting> {
        match (self.setting, &self.population, &self.distribution) {
            (_, None, None) => Err(CliError::Config("config needs a population or a distribution".into())),
            (Some(Setting::NAgent), None, Some(_)) => {
                Err(CliError::Config("the n_agent setting needs a population, not a distribution".into()))
            }
            (Some(s), _, _) => Ok(s),
            (None, Some(_), _) => Ok(Setting::NAgent),
            (None, None, Some(_)) => Ok(Setting::MeanField),
        }
    }

    pub fn instance(&self) -> Result<Instance> {
        let setting = self.setting()?;
        let population = match &self.population {
            Some(src) => Some(Population::new(self.resolve(src, "population")?, self.model)?),
            None => None,
        };
        match (setting, population) {
            (Setting::NAgent, Some(p)) => Ok(Instance::NAgent(p)),
            (Setting::MeanField, Some(p)) => Ok(Instance::MeanField(empirical_distribution(&p))),
            (Setting::MeanField, None) => {
                let src = self.distribution.as_ref().expect("setting() checked presence");
                let atoms = self.resolve(src, "distribution")?;
                Ok(Instance::MeanField(TypeDistribution::new(
                    atoms.into_iter().map(|a| (a.agent, a.weight)).collect(),
                    self.model,
                )?))
            }
            (Setting::NAgent, None) => unreachable!("setting() rejects n_agent without population"),
        }
    }

    pub fn strategies(&self) -> Result<Option<Vec<f64>>> {
        self.strategies.as_ref().map(|s| self.resolve(s, "strategies")).transpose()
    }

    /// Simulation settings with an optional seed override.
    pub fn sim_config(&self, seed: Option<u64>) -> Result<SimConfig> {
        let b = &self.simulation;
        let mut c = SimConfig::new(self.horizon, b.num_paths, seed.map_or_else(|| b.seed.value(), Ok)?);
        c.num_agents_sampled = b.num_agents_sampled;
        c.time_steps = b.time_steps;
        c.validate()?;
        Ok(c)
    }
}
