mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::Command;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Manifest;

/// Phase-space diagnostics for degenerate parabolic evolution equations.
#[derive(Debug, Parser)]
#[command(name = "gaborheat", version)]
struct Cli {
    /// JSON run configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (GABORHEAT_OUT takes precedence).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random batteries and data; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    action: Action,
}

#[derive(Debug, Subcommand)]
enum Action {
    #[command(flatten)]
    Run(Command),
    /// Print the JSON schema of the run configuration.
    Schema,
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    Ok(cfg)
}

fn execute(cli: &Cli, command: Command) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    let out = std::env::var_os("GABORHEAT_OUT").map(PathBuf::from).unwrap_or_else(|| cli.out.clone());
    let start = Instant::now();
    let run = command.run(&cfg)?;
    let manifest = Manifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed(),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: run.names(),
        scalars: run.scalars.clone(),
        warnings: run.warnings.clone(),
        config: cfg,
    };
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    run.flush(&out, &manifest)?;
    log::info!("{} finished in {:.2} s; outputs in {}", manifest.command, manifest.wall_time_s, out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.action {
        Action::Schema => {
            println!("{}", serde_json::to_string_pretty(&config::schema()).expect("schema serializes"));
            ExitCode::SUCCESS
        }
        Action::Run(command) => match execute(&cli, command) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    }
}
