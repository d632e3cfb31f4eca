use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod config;
mod experiments;
mod presets;

use config::{resolve, Experiment, Overrides};

#[derive(Parser)]
#[command(name = "fracsolve", about = "Rank-structured solvers for space-fractional diffusion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grünwald-Letnikov coefficients g_0..g_n.
    Coeffs(Common),
    /// Measured off-diagonal ranks of T against the a priori bound.
    RankStudy(Common),
    /// Implicit Euler for the 1D problem with known solution.
    Solve1d(Common),
    /// Low-rank implicit Euler for the 2D benchmark.
    Solve2d(Common),
    /// HODLR assembly, LU and solve timings.
    Bench(Common),
    /// List the available presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV output path; defaults to stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Problem size, or a comma-separated sweep.
    #[arg(long, value_name = "N")]
    n: Option<String>,
    /// Fractional order; `a1,a2` for solve2d.
    #[arg(long, value_name = "ALPHA")]
    alpha: Option<String>,
}

/// Applies `FRACSOLVE_THREADS` to the dense kernels.
fn set_threads() -> Result<()> {
    let Ok(v) = std::env::var("FRACSOLVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("FRACSOLVE_THREADS must be a positive integer, got `{v}`"))?;
    let par = if n == 1 { faer::Par::Seq } else { faer::Par::rayon(n) };
    faer::set_global_parallelism(par);
    Ok(())
}

fn run(kind: Experiment, args: Common) -> Result<()> {
    let text = match &args.config {
        Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let overrides = Overrides {
        preset: args.preset,
        n: args.n,
        alpha: args.alpha,
        out: args.out,
    };
    let cfg = resolve(kind, text.as_deref(), &overrides)?;
    let table = experiments::run(&cfg)?;
    match &cfg.out {
        Some(path) => {
            let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            table.write_csv(io::BufWriter::new(f))?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = set_threads().and_then(|_| match cli.command {
        Command::Coeffs(a) => run(Experiment::Coeffs, a),
        Command::RankStudy(a) => run(Experiment::RankStudy, a),
        Command::Solve1d(a) => run(Experiment::Solve1d, a),
        Command::Solve2d(a) => run(Experiment::Solve2d, a),
        Command::Bench(a) => run(Experiment::Bench, a),
        Command::Presets => {
            for p in presets::PRESETS {
                println!("{:<14} {:<10} {}", p.name, p.kind, p.summary);
            }
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
