use std::path::PathBuf;
use std::process::ExitCode;

use bistab::cli::{run, Invocation};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bistab", version, about = "Driven cavity/transmon bistability simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the trajectory seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-field steady-state branches.
    Meanfield(Common),
    /// Master-equation steady state at one drive frequency.
    Steady(Common),
    /// Steady-state lineshape over a frequency grid.
    Sweep(Common),
    /// Stochastic trajectories.
    Traj(Common),
    /// Husimi Q function of the steady state.
    Qfunc(Common),
    /// Analytic Fokker-Planck lineshape.
    Fpe(Common),
    /// Runs a built-in figure recipe.
    Reproduce {
        /// One of fig1, fig2, fig3b, si2, si4, si5, si6.
        tag: String,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, tag, common) = match cli.command {
        Command::Meanfield(c) => ("meanfield", None, c),
        Command::Steady(c) => ("steady", None, c),
        Command::Sweep(c) => ("sweep", None, c),
        Command::Traj(c) => ("traj", None, c),
        Command::Qfunc(c) => ("qfunc", None, c),
        Command::Fpe(c) => ("fpe", None, c),
        Command::Reproduce { tag, common } => ("reproduce", Some(tag), common),
    };
    if let Some(n) = common.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let inv = Invocation { command: name.into(), tag, config: common.config, out: common.out, seed: common.seed };
    ExitCode::from(run(&inv) as u8)
}
