//! Thin command-line surface over [`mdeflow::cli`].

use clap::{Parser, Subcommand, ValueEnum};
use mdeflow::cli;
use mdeflow::transport::Method;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "mdeflow",
    version,
    about = "Particle schemes and verification for measure flow equations"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write curve files plus a run manifest.
    Simulate { config: PathBuf },
    /// Residual-certify a stored curve against a scenario config.
    Verify {
        curve_index: PathBuf,
        scenario_config: PathBuf,
        #[arg(long)]
        threshold: f64,
    },
    /// Convergence study across partition levels; emits a CSV.
    Converge { config: PathBuf },
    /// W_p distance between two cloud CSV files.
    Distance {
        cloud_a: PathBuf,
        cloud_b: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
        method: MethodArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exact1d,
    Assignment,
    Sinkhorn,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => Method::Auto,
            MethodArg::Exact1d => Method::Exact1D,
            MethodArg::Assignment => Method::Assignment,
            MethodArg::Sinkhorn => Method::Sinkhorn,
        }
    }
}

fn main() {
    // MDE_THREADS caps internal parallelism; unset uses the rayon default.
    if let Ok(threads) = std::env::var("MDE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let args = Args::parse();
    let code = match args.command {
        Command::Simulate { config } => cli::cmd_simulate(&config),
        Command::Verify {
            curve_index,
            scenario_config,
            threshold,
        } => cli::cmd_verify(&curve_index, &scenario_config, threshold),
        Command::Converge { config } => cli::cmd_converge(&config),
        Command::Distance {
            cloud_a,
            cloud_b,
            p,
            method,
        } => cli::cmd_distance(&cloud_a, &cloud_b, p, method.into()),
    };
    std::process::exit(code);
}
