//! Subcommand implementations. Each returns the rendered report together
//! with the error (if any) that decides the exit code, so failing runs still
//! leave a report behind.

use serde::Serialize;

use relperf_core::convergence::{convergence_study, fit_decay_exponent, ConvergenceTable};
use relperf_core::equilibria::{
    mfe_value_exponents, nash_value_exponents, solve_mfe, solve_nash, Aggregates, EquilibriumResult, Setting,
    ValueExponent, Warning,
};
use relperf_core::exec::ExecMode;
use relperf_core::simulation::best_response::DEFAULT_TOL;
use relperf_core::simulation::{
    best_response, best_response_mf, conditional_aggregate, exact_payoff, mc_payoff, mfe_consistency_check,
    simulate_terminal, ConsistencyReport, PayoffEstimate, WealthMatrix,
};
use relperf_core::{Error, ModelKind};

use crate::config::{Instance, RunConfig};
use crate::error::{CliError, Result};
use crate::report::{fmt_f64, to_json};
use crate::sweep::{preset, run_sweep, to_csv, SweepCell, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Rendered output of one subcommand.
#[derive(Debug)]
pub struct Output {
    /// File name used under `--out`.
    pub name: String,
    pub text: String,
    /// Set when the run should end with a nonzero exit code.
    pub failure: Option<CliError>,
}

impl Output {
    fn ok(stem: &str, format: Format, text: String) -> Self {
        Output { name: format!("{stem}.{}", format.extension()), text, failure: None }
    }
}

#[derive(Debug, Serialize)]
struct NoEquilibriumReport<'a> {
    status: &'a str,
    model: ModelKind,
    setting: Setting,
    phi: f64,
    psi: f64,
    message: String,
}

fn no_equilibrium(stem: &str, kind: ModelKind, setting: Setting, phi: f64, psi: f64) -> Output {
    let report = NoEquilibriumReport {
        status: "no_equilibrium",
        model: kind,
        setting,
        phi,
        psi,
        message: format!(
            "a constant equilibrium exists only when the average competition weight psi < 1; here psi = {psi}"
        ),
    };
    Output {
        name: format!("{stem}.json"),
        text: to_json(&report),
        failure: Some(CliError::NoEquilibrium { psi }),
    }
}

fn solve_instance(kind: ModelKind, inst: &Instance) -> relperf_core::Result<EquilibriumResult> {
    match inst {
        Instance::NAgent(p) => solve_nash(kind, p),
        Instance::MeanField(d) => solve_mfe(kind, d),
    }
}

fn setting_of(inst: &Instance) -> Setting {
    match inst {
        Instance::NAgent(_) => Setting::NAgent,
        Instance::MeanField(_) => Setting::MeanField,
    }
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub status: String,
    pub model: ModelKind,
    pub setting: Setting,
    pub horizon: f64,
    pub aggregates: Aggregates,
    pub strategies: Vec<f64>,
    pub merton_components: Vec<f64>,
    pub competition_components: Vec<f64>,
    pub value_exponents: Vec<ValueExponent>,
    pub warnings: Vec<Warning>,
}

pub fn run_solve(cfg: &RunConfig, format: Format) -> Result<Output> {
    let inst = cfg.instance()?;
    let eq = match solve_instance(cfg.model, &inst) {
        Ok(eq) => eq,
        Err(Error::NoEquilibrium { phi, psi }) => {
            return Ok(no_equilibrium("solve", cfg.model, setting_of(&inst), phi, psi))
        }
        Err(e) => return Err(e.into()),
    };
    let value_exponents = match &inst {
        Instance::NAgent(p) => nash_value_exponents(p, &eq)?,
        Instance::MeanField(d) => mfe_value_exponents(d, &eq)?,
    };
    let text = match format {
        Format::Json => to_json(&SolveReport {
            status: "ok".into(),
            model: eq.kind,
            setting: eq.setting,
            horizon: cfg.horizon,
            aggregates: eq.aggregates,
            competition_components: eq.competition_components(),
            strategies: eq.strategies,
            merton_components: eq.merton_components,
            value_exponents,
            warnings: eq.warnings,
        }),
        Format::Csv => {
            let mut out = String::from("index,strategy,merton_component,competition_component,rho\n");
            let comp = eq.competition_components();
            for (k, pi) in eq.strategies.iter().enumerate() {
                out.push_str(&format!(
                    "{k},{},{},{},{}\n",
                    fmt_f64(*pi),
                    fmt_f64(eq.merton_components[k]),
                    fmt_f64(comp[k]),
                    fmt_f64(value_exponents[k].rho)
                ));
            }
            out
        }
    };
    Ok(Output::ok("solve", format, text))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AgentCheck {
    pub index: usize,
    pub strategy: f64,
    pub argmax: f64,
    pub abs_error: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub model: ModelKind,
    pub setting: Setting,
    pub tolerance: f64,
    pub checks: Vec<AgentCheck>,
    pub consistency: Option<ConsistencyReport>,
    pub passed: bool,
}

/// Compares the strategy profile (the closed form unless the config gives
/// one) with a numerical best response for every agent or atom, and runs
/// the consistency check in the mean field setting.
pub fn run_verify(cfg: &RunConfig, seed: Option<u64>, format: Format) -> Result<Output> {
    let inst = cfg.instance()?;
    let kind = cfg.model;
    let eq = match solve_instance(kind, &inst) {
        Ok(eq) => eq,
        Err(Error::NoEquilibrium { phi, psi }) => {
            return Ok(no_equilibrium("verify", kind, setting_of(&inst), phi, psi))
        }
        Err(e) => return Err(e.into()),
    };
    let strategies = match cfg.strategies()? {
        Some(s) if s.len() != eq.strategies.len() => {
            return Err(CliError::Config(format!(
                "strategies has {} entries, instance has {}",
                s.len(),
                eq.strategies.len()
            )))
        }
        Some(s) => s,
        None => eq.strategies.clone(),
    };
    let tol = cfg.verify.tolerance;
    let check = |index: usize, argmax: f64| {
        let abs_error = (argmax - strategies[index]).abs();
        AgentCheck { index, strategy: strategies[index], argmax, abs_error, passed: abs_error < tol }
    };
    let (checks, consistency) = match &inst {
        Instance::NAgent(p) => {
            let checks = (0..p.len())
                .map(|i| {
                    best_response(kind, i, p, &strategies, cfg.horizon, None, DEFAULT_TOL)
                        .map(|br| check(i, br))
                })
                .collect::<relperf_core::Result<Vec<_>>>()?;
            (checks, None)
        }
        Instance::MeanField(d) => {
            let agg = conditional_aggregate(kind, d, &strategies)?;
            let checks = d
                .atoms()
                .iter()
                .enumerate()
                .map(|(k, atom)| {
                    best_response_mf(kind, &atom.agent, &agg, strategies[k], cfg.horizon, None, DEFAULT_TOL)
                        .map(|br| check(k, br))
                })
                .collect::<relperf_core::Result<Vec<_>>>()?;
            let mut sim = cfg.sim_config(seed)?;
            sim.num_paths = cfg.verify.consistency_draws;
            let profile = EquilibriumResult { strategies: strategies.clone(), ..eq.clone() };
            (checks, Some(mfe_consistency_check(kind, d, &profile, &sim)?))
        }
    };
    let passed = checks.iter().all(|c| c.passed) && consistency.is_none_or(|c| c.passed);
    let report =
        VerifyReport { model: kind, setting: setting_of(&inst), tolerance: tol, checks, consistency, passed };
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut out = String::from("index,strategy,argmax,abs_error,passed\n");
            for c in &report.checks {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.index,
                    fmt_f64(c.strategy),
                    fmt_f64(c.argmax),
                    fmt_f64(c.abs_error),
                    c.passed
                ));
            }
            out
        }
    };
    let mut out = Output::ok("verify", format, text);
    if !passed {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        let mut msg = format!("{failed} of {} best-response checks failed", report.checks.len());
        if report.consistency.is_some_and(|c| !c.passed) {
            msg.push_str("; consistency check failed");
        }
        out.failure = Some(CliError::VerifyFailed(msg));
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SweepReport<'a> {
    model: ModelKind,
    spec: &'a SweepSpec,
    cells: &'a [SweepCell],
}

/// Runs the preset when given, otherwise the config's sweep block.
pub fn run_sweep_cmd(
    cfg: Option<&RunConfig>,
    preset_name: Option<&str>,
    exec: ExecMode,
    format: Format,
) -> Result<Output> {
    let (kind, spec) = match (preset_name, cfg) {
        (Some(name), _) => preset(name)?,
        (None, Some(cfg)) => {
            (cfg.model, cfg.sweep.ok_or_else(|| CliError::Config("config has no sweep block".into()))?)
        }
        (None, None) => return Err(CliError::Config("sweep needs --preset or --config".into())),
    };
    let cells = run_sweep(kind, &spec, exec)?;
    let text = match format {
        Format::Csv => to_csv(&spec, &cells),
        Format::Json => to_json(&SweepReport { model: kind, spec: &spec, cells: &cells }),
    };
    Ok(Output::ok("sweep", format, text))
}

#[derive(Debug, Serialize)]
struct ConvergeReport {
    table: ConvergenceTable,
    /// Fitted `a` in `max_abs_error ~ n^-a`; absent when an error is zero.
    decay_exponent: Option<f64>,
}

pub fn run_converge(cfg: &RunConfig, seed: Option<u64>, exec: ExecMode, format: Format) -> Result<Output> {
    let block =
        cfg.convergence.as_ref().ok_or_else(|| CliError::Config("config has no convergence block".into()))?;
    let d = match cfg.instance()? {
        Instance::MeanField(d) => d,
        Instance::NAgent(_) => {
            return Err(CliError::Config("converge needs a distribution (mean_field setting)".into()))
        }
    };
    let seed = match seed {
        Some(s) => s,
        None => cfg.simulation.seed.value()?,
    };
    let table = convergence_study(cfg.model, &d, block.mode, &block.n_list, block.replications, seed, exec)?;
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let ns: Vec<usize> = table.rows.iter().map(|r| r.n).collect();
            let errs: Vec<f64> = table.rows.iter().map(|r| r.max_abs_error).collect();
            let decay_exponent = fit_decay_exponent(&ns, &errs).ok();
            to_json(&ConvergeReport { table, decay_exponent })
        }
    };
    Ok(Output::ok("converge", format, text))
}

#[derive(Debug, Serialize)]
struct AgentPayoff {
    index: usize,
    monte_carlo: PayoffEstimate,
    exact: f64,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    model: ModelKind,
    setting: Setting,
    strategies: Vec<f64>,
    /// Monte Carlo vs exact expected utility (n-agent setting only).
    payoffs: Option<Vec<AgentPayoff>>,
    wealth: WealthMatrix,
}

/// Simulates terminal wealth of every agent (or atom) at its equilibrium
/// strategy with one shared common noise per path.
pub fn run_simulate(cfg: &RunConfig, seed: Option<u64>, exec: ExecMode, format: Format) -> Result<Output> {
    let inst = cfg.instance()?;
    let kind = cfg.model;
    let eq = match solve_instance(kind, &inst) {
        Ok(eq) => eq,
        Err(Error::NoEquilibrium { phi, psi }) => {
            return Ok(no_equilibrium("simulate", kind, setting_of(&inst), phi, psi))
        }
        Err(e) => return Err(e.into()),
    };
    let mut sim = cfg.sim_config(seed)?;
    sim.exec = exec;
    let agents: Vec<_> = match &inst {
        Instance::NAgent(p) => p.agents().iter().copied().zip(eq.strategies.iter().copied()).collect(),
        Instance::MeanField(d) => {
            d.atoms().iter().map(|a| a.agent).zip(eq.strategies.iter().copied()).collect()
        }
    };
    let wealth = simulate_terminal(kind, &agents, &sim, true)?;
    let text = match format {
        Format::Csv => {
            let mut out = String::from("path");
            for k in 0..wealth.num_agents {
                out.push_str(&format!(",agent_{k}"));
            }
            out.push('\n');
            for p in 0..wealth.num_paths {
                out.push_str(&p.to_string());
                for x in wealth.row(p) {
                    out.push(',');
                    out.push_str(&fmt_f64(*x));
                }
                out.push('\n');
            }
            out
        }
        Format::Json => {
            let payoffs = match &inst {
                Instance::NAgent(p) => Some(
                    (0..p.len())
                        .map(|i| {
                            Ok(AgentPayoff {
                                index: i,
                                monte_carlo: mc_payoff(kind, i, p, &eq.strategies, &sim)?,
                                exact: exact_payoff(kind, i, p, &eq.strategies, cfg.horizon)?,
                            })
                        })
                        .collect::<relperf_core::Result<Vec<_>>>()?,
                ),
                Instance::MeanField(_) => None,
            };
            to_json(&SimulateReport {
                model: kind,
                setting: eq.setting,
                strategies: eq.strategies,
                payoffs,
                wealth,
            })
        }
    };
    Ok(Output::ok("simulate", format, text))
}
