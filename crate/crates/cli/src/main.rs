use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use relperf_cli::commands::{
    run_converge, run_simulate, run_solve, run_sweep_cmd, run_verify, Format, Output,
};
use relperf_cli::config::RunConfig;
use relperf_cli::report::emit;
use relperf_cli::{CliError, Result};
use relperf_core::exec::ExecMode;

#[derive(Debug, Parser)]
#[command(name = "relperf", version, about = "Portfolio games under relative performance concerns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for reports; stdout when omitted (and the config has no output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the simulation seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form equilibrium report.
    Solve,
    /// Numerical best-response and consistency checks of the equilibrium.
    Verify,
    /// Strategy grid over two parameters.
    Sweep {
        #[arg(long, value_enum)]
        preset: Option<Preset>,
    },
    /// n-agent to mean field convergence table.
    Converge,
    /// Terminal wealth simulation at the equilibrium.
    Simulate,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("RELPERF_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("RELPERF_THREADS={v:?} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: &Cli) -> Result<Output> {
    configure_threads()?;
    let cfg = cli.config.as_deref().map(RunConfig::from_path).transpose()?;
    let need = || cfg.as_ref().ok_or_else(|| CliError::Config("--config is required".into()));
    let exec = ExecMode::default();
    let format = |default| match cli.format {
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Csv) => Format::Csv,
        None => default,
    };
    match &cli.command {
        Command::Solve => run_solve(need()?, format(Format::Json)),
        Command::Verify => run_verify(need()?, cli.seed, format(Format::Json)),
        Command::Sweep { preset } => {
            let name = preset.map(|p| match p {
                Preset::Fig1 => "fig1",
                Preset::Fig2 => "fig2",
                Preset::Fig3 => "fig3",
            });
            run_sweep_cmd(cfg.as_ref(), name, exec, format(Format::Csv))
        }
        Command::Converge => run_converge(need()?, cli.seed, exec, format(Format::Csv)),
        Command::Simulate => run_simulate(need()?, cli.seed, exec, format(Format::Csv)),
    }
}

fn out_dir(cli: &Cli) -> Option<PathBuf> {
    if cli.out.is_some() {
        return cli.out.clone();
    }
    let path = cli.config.as_ref()?;
    let cfg = RunConfig::from_path(path).ok()?;
    cfg.output.dir.map(|d| cfg.base_dir.join(d))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|out| {
        emit(out_dir(&cli).as_deref(), &out.name, &out.text)?;
        match out.failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relperf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
