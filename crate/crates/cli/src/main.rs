use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use wloja::runner::{self, Overrides};

/// Numerical laboratory for 1D Wasserstein gradient flows and Łojasiewicz
/// inequalities. Exit codes: 0 all checks passed, 1 check failure,
/// 2 configuration error, 3 numerical failure.
#[derive(Parser)]
#[command(name = "wloja", version)]
struct Cli {
    /// Override the config's random seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory (also settable via WLOJA_OUT)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress per-run status lines
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single experiment config
    Run { config: PathBuf },
    /// Run every *.json config in a directory, or a sweep-kind config file
    Sweep { path: PathBuf },
    /// Render plot.svg from a completed run directory
    Plot { run_dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides { seed: cli.seed, out: cli.out, quiet: cli.quiet };
    let result = match cli.cmd {
        Cmd::Run { config } => runner::run_file(&config, &ov),
        Cmd::Sweep { path } => runner::sweep_path(&path, &ov),
        Cmd::Plot { run_dir } => runner::plot_dir(&run_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
