use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spdyn_core::exp::{self, actions, parse_config_for, ExperimentConfig, Module};
use spdyn_core::Error;

#[derive(Debug, Parser)]
#[command(name = "spdyn", version, about = "Speciation dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    module: ModuleCommand,

    /// Configuration file in TOML form.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed, overriding `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overriding `[run] out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Parameter override `key=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Print the resolved configuration and exit without running.
    #[arg(long, global = true)]
    show_config: bool,
}

#[derive(Debug, Subcommand)]
enum ModuleCommand {
    /// Selection-mutation flow: run, stationary, cubic.
    Selmut(Action),
    /// Discrete-time variant: run, stationary, sweep.
    Dd(Action),
    /// Finite-population Moran model: run.
    Moran(Action),
    /// Two-sex particle system: run, couple, dual, goodevents.
    Ips(Action),
    /// Oriented site percolation: survive, exact, fromips.
    Perc(Action),
    /// Reaction-diffusion limit: run, star, phase.
    Pde(Action),
}

#[derive(Debug, Args)]
struct Action {
    action: String,
}

impl ModuleCommand {
    fn split(&self) -> (Module, &str) {
        let (module, a) = match self {
            ModuleCommand::Selmut(a) => (Module::Selmut, a),
            ModuleCommand::Dd(a) => (Module::Dd, a),
            ModuleCommand::Moran(a) => (Module::Moran, a),
            ModuleCommand::Ips(a) => (Module::Ips, a),
            ModuleCommand::Perc(a) => (Module::Perc, a),
            ModuleCommand::Pde(a) => (Module::Pde, a),
        };
        (module, a.action.as_str())
    }
}

enum Failure {
    Config(String),
    Run(Error),
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let (module, action) = cli.module.split();
    if !actions(module).contains(&action) {
        return Err(Failure::Config(format!(
            "{} has no action {action:?}; choose one of {}",
            module.as_str(),
            actions(module).join(", ")
        )));
    }
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| {
            Failure::Run(Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
        })?,
        None => String::new(),
    };
    let source = cli
        .config
        .as_ref()
        .map_or_else(|| "defaults".to_string(), |p| p.display().to_string());
    let mut config =
        parse_config_for(&text, Some(module), Some(action)).map_err(|e| Failure::Config(format!("{source}: {e}")))?;
    for o in &cli.overrides {
        config
            .set_param(o)
            .map_err(|e| Failure::Config(format!("--set {o}: {e}")))?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = load(cli)?;
    if cli.show_config {
        print!("{}", config.to_text());
        return Ok(());
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&config.id));
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let manifest = exp::run(&config, &out, jobs).map_err(Failure::Run)?;
    println!(
        "wrote {} files to {} (config {}, seed {}, {:.2} s)",
        manifest.files.len(),
        out.display(),
        manifest.config_hash,
        manifest.seed,
        manifest.wall_time
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Run(err)) => {
            let (kind, code) = if err.is_numerical() {
                ("numerical abort", 3)
            } else if err.is_io() {
                ("i/o error", 1)
            } else {
                ("invalid input", 2)
            };
            eprintln!("{kind}: {err}");
            ExitCode::from(code)
        }
    }
}
