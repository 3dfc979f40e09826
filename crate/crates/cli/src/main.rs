//! `cwf`: batch front end for the simplification pipeline.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{MetricsArgs, RvdArgs, SimplifyArgs};

/// Feature-consolidating mesh simplification.
///
/// Exit codes: 0 success, 1 input/output error, 2 invalid configuration,
/// 3 optimization failure (partial outputs are still written).
#[derive(Parser, Debug)]
#[command(name = "cwf", version, about, long_about)]
struct Cli {
    /// Worker threads for the parallel stages. Falls back to CWF_THREADS,
    /// then to all cores.
    #[arg(long, global = true, env = "CWF_THREADS")]
    threads: Option<usize>,

    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simplify a mesh to a target vertex count and write the dual mesh.
    Simplify(SimplifyArgs),
    /// Compare a simplified mesh against the ground truth.
    Metrics(MetricsArgs),
    /// Export the restricted Voronoi decomposition of initial sites.
    Rvd(RvdArgs),
    /// Re-run a `simplify` manifest and check the outputs match.
    Replay {
        manifest: std::path::PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Simplify(args) => commands::simplify(&args, None),
        Command::Metrics(args) => commands::metrics(&args),
        Command::Rvd(args) => commands::rvd(&args),
        Command::Replay { manifest } => commands::replay(&manifest),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
