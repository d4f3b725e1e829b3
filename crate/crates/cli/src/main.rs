//! Config-driven experiment runner for the svlift toolkit.
//!
//! Exit codes: 0 ok, 2 config error, 3 runtime error or explosion, 4 failed
//! check under `--assert`.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Failure};

#[derive(Parser)]
#[command(name = "svlift", version, about = "Stochastic Volterra simulation and verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (overrides `output` in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// master seed (overrides `seed` in the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// worker threads for ensembles
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// exit with code 4 when the subcommand's check fails
    #[arg(long, global = true)]
    assert: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Kernel values against the Laplace transform of the lift measure
    KernelInfo,
    /// Atoms of the discretized lift measure
    Discretize,
    /// Semigroup decay exponent in the weighted dual norm
    DecayFit,
    /// Ensemble of lifted paths, or the Picard solution for σ ≡ 0
    Simulate,
    /// Lifted against direct solver over a step refinement sweep
    Compare,
    /// Itô formula residuals
    ItoCheck,
    /// Lyapunov criterion LV ≤ hV + d
    Lyapunov,
    /// Long-horizon run with moment and KS statistics
    Invariant,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::KernelInfo => "kernel-info",
            Command::Discretize => "discretize",
            Command::DecayFit => "decay-fit",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::ItoCheck => "ito-check",
            Command::Lyapunov => "lyapunov",
            Command::Invariant => "invariant",
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config <path> is required".into()))?;
    let source = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse(&source).map_err(|m| Failure::Config(format!("{}: {m}", path.display())))?;
    let seed = cli
        .seed
        .or(cfg.seed)
        .or(cfg.ensemble.and_then(|e| e.seed))
        .ok_or_else(|| Failure::Config(format!("{}: missing `seed` (no entropy default)", path.display())))?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .ok_or_else(|| Failure::Config("no output directory: pass --out or set `output`".into()))?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("creating {}: {e}", out.display())))?;
    let ctx = Context {
        cfg: &cfg,
        source: &source,
        out: out.clone(),
        seed,
        assert: cli.assert,
    };
    // the manifest is written even when a check fails, so the run can be reproduced
    let result = match cli.command {
        Command::KernelInfo => commands::kernel_info(&ctx),
        Command::Discretize => commands::discretize(&ctx),
        Command::DecayFit => commands::decay_fit(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::ItoCheck => commands::ito_check(&ctx),
        Command::Lyapunov => commands::lyapunov(&ctx),
        Command::Invariant => commands::invariant(&ctx),
    };
    let files: Vec<String> = match &result {
        Ok(paths) => paths
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        Err(_) => Vec::new(),
    };
    output::write_manifest(&out, cli.command.name(), &source, seed, &files)
        .map_err(|e| Failure::Runtime(format!("writing manifest: {e}")))?;
    result.map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("svlift {}: {f}", cli.command.name());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
