// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracbump::{Command, Error, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "fracbump", version, about = "Multi-spike solutions of fractional Schrödinger equations")]
struct Cli {
    #[command(subcommand)]
    task: Task,
}

#[derive(Subcommand, Debug)]
enum Task {
    /// Ground state, its metadata and the eigenvalue check.
    GroundState(Args),
    /// Expansion coefficients and the r0 table from a stored ground state.
    Coeffs(Args),
    /// Ring ansatz and its error field.
    Ansatz(Args),
    /// Projected nonlinear correction at each k.
    Reduce(Args),
    /// Radius search and the corrected solution for one k.
    Construct(Args),
    /// Reduced energy over a radius window.
    Sweep(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Config file, `key = value` lines or JSON.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's k list with one value.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; defaults to the config's `out`, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Task {
    fn split(self) -> (Command, Args) {
        match self {
            Task::GroundState(a) => (Command::GroundState, a),
            Task::Coeffs(a) => (Command::Coeffs, a),
            Task::Ansatz(a) => (Command::Ansatz, a),
            Task::Reduce(a) => (Command::Reduce, a),
            Task::Construct(a) => (Command::Construct, a),
            Task::Sweep(a) => (Command::Sweep, a),
        }
    }
}

fn execute(cmd: Command, args: Args) -> fracbump::Result<PathBuf> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(k) = args.k {
        cfg.k = vec![k];
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    fracbump::pipeline::run(cmd, &cfg, &out)?;
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FRACBUMP_LOG", "info")).init();
    let (cmd, args) = Cli::parse().task.split();
    match execute(cmd, args) {
        Ok(out) => {
            log::info!("{} finished; manifest in {}", cmd.name(), out.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
                "command": cmd.name(),
            });
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
