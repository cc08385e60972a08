use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use malt::experiment::{execute, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "malt",
    version,
    about = "Run MALT experiments from a TOML config"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single adaptive run: trace.csv, report.json, ess.csv, optional draws.csv
    Run(Args),
    /// Fixed-kernel grid over trajectory length and damping: surface.csv
    Sweep(Args),
    /// Repeated-seed comparison of kernels: bench.csv
    Bench(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.seed`
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Run(a) => (Command::Run, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Bench(a) => (Command::Bench, a),
    };
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = ExperimentConfig::load(&args.config).and_then(|mut cfg| {
        if let Some(seed) = args.seed {
            cfg.run.seed = seed;
        }
        let out = args.out.unwrap_or_else(|| cfg.output.dir.clone());
        execute(command, &cfg, &out)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
