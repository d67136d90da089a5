use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zvonkin_harness::config::{self, ExperimentConfig, Overrides};
use zvonkin_harness::error::{HarnessError, EXIT_CONFIG};
use zvonkin_harness::pipeline::{self, Command};

#[derive(Parser)]
#[command(
    name = "zvonkin",
    version,
    about = "Zvonkin-transform laboratory for SDEs with Hoelder drift"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Experiment config (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in config: zero, linear, ou or rough.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Master seed for all Brownian increments.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for path-parallel stages.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default: config value or ./zvonkin-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of Monte-Carlo paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Euler step.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Fixed λ, replacing the config's λ policy.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Store every Euler state in paths.csv.
    #[arg(long, global = true)]
    full_paths: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve the resolvent equation for psi.
    SolveResolvent,
    /// Build phi = id + psi and the transformed coefficients.
    BuildTransform,
    /// Simulate the direct and transformed Euler schemes.
    Simulate,
    /// KDE densities and the change-of-variables check.
    Density,
    /// Nourdin-Viens density of the chosen functional.
    NvDensity,
    /// Run the verification suite.
    Verify,
    /// Every stage followed by verification.
    Run,
    /// c(lambda) and residual over a list of lambdas.
    SweepLambda,
    /// Print a preset config as JSON.
    ShowConfig,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => config::preset(name).ok_or_else(|| {
            HarnessError::Config(format!(
                "unknown preset `{name}` (expected one of {:?})",
                config::PRESETS
            ))
        })?,
        (None, None) => return Err(HarnessError::Config("either --config or --preset is required".into())),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        n_paths: cli.paths,
        dt: cli.dt,
        lambda: cli.lambda,
        out: cli.out.clone(),
    })?;
    if cli.full_paths {
        cfg.simulation.full_paths = true;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32, HarnessError> {
    let cfg = load(cli)?;
    let cmd = match cli.command {
        Cmd::ShowConfig => {
            print!("{}", zvonkin_harness::artifacts::sorted_json(&cfg));
            return Ok(0);
        }
        Cmd::SolveResolvent => Command::SolveResolvent,
        Cmd::BuildTransform => Command::BuildTransform,
        Cmd::Simulate => Command::Simulate,
        Cmd::Density => Command::Density,
        Cmd::NvDensity => Command::NvDensity,
        Cmd::Verify => Command::Verify,
        Cmd::Run => Command::Run,
        Cmd::SweepLambda => Command::SweepLambda,
    };
    let outcome = pipeline::execute(cmd, &cfg)?;
    if let Some(report) = &outcome.report {
        for c in &report.checks {
            println!("{c}");
        }
        println!("overall: {}", if report.pass { "PASS" } else { "FAIL" });
    }
    println!("manifest: {}", outcome.manifest.display());
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
