use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use potlab::commands::{self, DeviationOptions, Routes, RunConfig};
use potlab::verify::{VerifyConfig, DEFAULT_SEED};
use potlab::{parse_levels, Failure, EXIT_CONFIG};
use potlab_core::ensemble::SamplerMethod;
use potlab_core::orthopoly::Construction;
use potlab_core::Precision;

#[derive(Parser)]
#[command(
    name = "potlab",
    version,
    about = "Weighted potential theory experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A level list parsed as one argument value.
#[derive(Clone)]
struct Levels(Vec<usize>);

fn levels(s: &str) -> Result<Levels, String> {
    parse_levels(s).map(Levels)
}

#[derive(Args, Clone)]
struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Levels: `a..b`, `a,b,c`, or a single integer.
    #[arg(long, short = 'n', default_value = "1..10", value_parser = levels)]
    n: Levels,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the problem file's precision.
    #[arg(long, value_enum)]
    precision: Option<PrecisionArg>,
}

#[derive(ValueEnum, Clone, Copy)]
enum PrecisionArg {
    Double,
    Extended,
}

#[derive(ValueEnum, Clone, Copy)]
enum MethodArg {
    Auto,
    Cholesky,
    Stieltjes,
}

#[derive(ValueEnum, Clone, Copy)]
enum SamplerArg {
    KernelChain,
    Rejection,
}

#[derive(Subcommand)]
enum Command {
    /// Orthonormal bases per level (JSON) and a summary table.
    Ortho {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
    /// Christoffel function `K_n` on a sample grid of the domain.
    Christoffel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },
    /// `log Z_n` by the norm-product, homogeneous-Gram and Monte Carlo routes.
    Partition {
        #[command(flatten)]
        common: Common,
        /// norm, gram, mc, or all (comma separated).
        #[arg(long, default_value = "all", value_parser = Routes::parse)]
        route: Routes,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Discretized weighted equilibrium measure.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Number of cells.
        #[arg(short = 'M', long = "cells", default_value_t = 800)]
        cells: usize,
    },
    /// Weighted Fekete points and transfinite diameter estimates.
    Fekete {
        #[command(flatten)]
        common: Common,
        /// Search grid points per component, per unit of `n + 1`.
        #[arg(long, default_value_t = 40)]
        grid_factor: usize,
        #[arg(short = 'M', long = "cells", default_value_t = 800)]
        cells: usize,
    },
    /// Large-deviation estimates for the ensemble.
    Deviation {
        #[command(flatten)]
        common: Common,
        /// Fixed eta; default delta_w * n^(-1/2).
        #[arg(long)]
        eta: Option<f64>,
        /// Fixed weighted transfinite diameter; default from the equilibrium solve.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, value_enum, default_value = "kernel-chain")]
        sampler: SamplerArg,
        /// Write every sampled configuration.
        #[arg(long)]
        dump: bool,
        #[arg(short = 'M', long = "cells", default_value_t = 800)]
        cells: usize,
    },
    /// Free energy on the real line with w = exp(-Q).
    Unbounded {
        #[command(flatten)]
        common: Common,
        /// Relative tail tolerance for the restriction interval.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Runs the acceptance suite.
    Verify {
        /// Suite name; only `core` exists.
        #[arg(long, default_value = "core")]
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Caps the levels; criteria needing larger n are skipped.
        #[arg(long, short = 'n', value_parser = levels)]
        n: Option<Levels>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run_config(c: Common) -> RunConfig {
    RunConfig {
        problem: c.problem,
        levels: c.n.0,
        seed: c.seed,
        out: c.out,
        precision: c.precision.map(|p| match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("POTLAB_THREADS") else {
        return Ok(());
    };
    let k: usize = v.parse().ok().filter(|&k| k > 0).ok_or_else(|| {
        Failure::config(format!(
            "POTLAB_THREADS must be a positive integer, got `{v}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| Failure::config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32, Failure> {
    configure_threads()?;
    match cli.command {
        Command::Ortho { common, method } => {
            let m = match method {
                MethodArg::Auto => Construction::Auto,
                MethodArg::Cholesky => Construction::Cholesky,
                MethodArg::Stieltjes => Construction::Stieltjes,
            };
            commands::cmd_ortho(&run_config(common), m)
        }
        Command::Christoffel { common, grid } => {
            commands::cmd_christoffel(&run_config(common), grid)
        }
        Command::Partition {
            common,
            route,
            samples,
        } => commands::cmd_partition(&run_config(common), route, samples),
        Command::Equilibrium { common, cells } => {
            commands::cmd_equilibrium(&run_config(common), cells)
        }
        Command::Fekete {
            common,
            grid_factor,
            cells,
        } => commands::cmd_fekete(&run_config(common), grid_factor, cells),
        Command::Deviation {
            common,
            eta,
            delta,
            samples,
            sampler,
            dump,
            cells,
        } => commands::cmd_deviation(
            &run_config(common),
            DeviationOptions {
                eta,
                delta_w: delta,
                samples,
                method: match sampler {
                    SamplerArg::KernelChain => SamplerMethod::KernelChain,
                    SamplerArg::Rejection => SamplerMethod::Rejection,
                },
                dump,
                cells,
            },
        ),
        Command::Unbounded { common, tol } => commands::cmd_unbounded(&run_config(common), tol),
        Command::Verify {
            suite,
            seed,
            n,
            out,
        } => {
            if suite != "core" {
                return Err(Failure::config(format!("unknown suite `{suite}`")));
            }
            let cfg = VerifyConfig {
                seed,
                max_level: n.map(|l| *l.0.last().unwrap()),
            };
            commands::cmd_verify(&cfg, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("potlab: {}", f.message);
            ExitCode::from(if f.code == 0 { EXIT_CONFIG } else { f.code } as u8)
        }
    }
}
