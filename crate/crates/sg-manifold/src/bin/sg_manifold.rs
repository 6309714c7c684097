use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sg_manifold::cli;

#[derive(Parser)]
#[command(
    name = "sg-manifold",
    about = "Build and probe the invariant solitary manifold of the perturbed sine-Gordon equation"
)]
struct Cli {
    /// Worker threads for u-node-parallel stages (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Accepted for interface compatibility; every run is deterministic and
    /// seed-free already.
    #[arg(long, global = true)]
    seedless: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOut {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a manifold model from a config file.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Sweep the defining-relation residual over eps and series orders.
    ResidualSweep {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated eps values.
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Series orders to test (default: 2..=model order).
        #[arg(long, value_delimiter = ',')]
        order: Vec<usize>,
        /// Velocity stencil node index at which the residual is evaluated.
        #[arg(long, default_value_t = 1)]
        u_node: usize,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Integrate the modulation ODEs and emit trajectory/snapshot CSVs.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        xi0: f64,
        #[arg(long, default_value_t = 0.0)]
        u0: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        #[arg(long)]
        dt: Option<f64>,
        /// Number of manifold-state snapshots along the trajectory.
        #[arg(long, default_value_t = 0)]
        snapshots: usize,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Evolve the PDE against the manifold trajectory and report deviations.
    Verify {
        #[arg(long)]
        model: PathBuf,
        /// Optional config providing the [dynamics] section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        xi0: f64,
        #[arg(long, default_value_t = 0.0)]
        u0: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 20.0)]
        t_end: f64,
        /// Series orders to compare (default: 2..=model order).
        #[arg(long, value_delimiter = ',')]
        order: Vec<usize>,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Factorial-envelope report for the coefficient derivatives.
    BoundsCheck {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: CommonOut,
    },
    /// Time-rescaled modulation dynamics across an eps list.
    RescaledCheck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 4.0)]
        s_end: f64,
        #[command(flatten)]
        out: CommonOut,
    },
}

fn run(cmd: Command) -> sg_manifold::Result<()> {
    match cmd {
        Command::Build { config, out } => cli::run_build(&cli::BuildArgs {
            config,
            out_dir: out.out_dir,
        }),
        Command::ResidualSweep {
            model,
            eps,
            order,
            u_node,
            out,
        } => cli::run_residual_sweep(&cli::SweepArgs {
            model,
            eps,
            orders: order,
            u_node,
            out_dir: out.out_dir,
        }),
        Command::Simulate {
            model,
            xi0,
            u0,
            eps,
            t_end,
            dt,
            snapshots,
            out,
        } => cli::run_simulate(&cli::SimulateArgs {
            model,
            xi0,
            u0,
            eps,
            t_end,
            dt,
            snapshots,
            out_dir: out.out_dir,
        }),
        Command::Verify {
            model,
            config,
            xi0,
            u0,
            eps,
            t_end,
            order,
            out,
        } => cli::run_verify(&cli::VerifyArgs {
            model,
            config,
            xi0,
            u0,
            eps,
            t_end,
            orders: order,
            out_dir: out.out_dir,
        }),
        Command::BoundsCheck { model, out } => cli::run_bounds_check(&cli::BoundsArgs {
            model,
            out_dir: out.out_dir,
        }),
        Command::RescaledCheck {
            model,
            eps,
            s_end,
            out,
        } => cli::run_rescaled_check(&cli::RescaledArgs {
            model,
            eps,
            s_end,
            out_dir: out.out_dir,
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
