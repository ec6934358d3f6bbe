use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfg_lg::cli::{self, CliError, RunConfig};

/// Semi-Lagrangian / Lagrange-Galerkin mean field game solver.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write CSV outputs.
    Solve {
        config: PathBuf,
        /// Output directory, overriding `output` in the config.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve the LQ benchmark over `dx_list` and both variants; writes sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Validate a configuration without solving.
    Check { config: PathBuf },
}

fn load(path: &PathBuf, output: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut cfg = cli::parse_config(path)?;
    if let Some(o) = output {
        cfg.output = o;
    }
    Ok(cfg)
}

fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Solve { config, output } => {
            let cfg = load(&config, output)?;
            let s = cli::run_single(&cfg, |rec| {
                println!(
                    "iter={} residual={:.6e} wall_s={:.3}",
                    rec.iteration,
                    rec.residual,
                    rec.elapsed.as_secs_f64()
                )
            })?;
            println!(
                "status={} iterations={} residual={:.6e} steps={} dt={} wall_s={:.3}",
                if s.converged { "converged" } else { "not_converged" },
                s.iterations,
                s.residual,
                s.steps,
                s.dt,
                s.wall_s
            );
            println!("wrote {}", cfg.output.display());
        }
        Command::Sweep { config, output } => {
            let cfg = load(&config, output)?;
            println!(
                "{:>8} {:>14} {:>4} {:>4} {:>10} {:>10} {:>10} {:>10}",
                "dx", "variant", "N", "it", "m_sup", "m_l2", "v_sup", "v_l2"
            );
            cli::run_table_sweep(&cfg, |r| {
                let e = &r.errors;
                println!(
                    "{:>8} {:>14} {:>4} {:>4} {:>10.3e} {:>10.3e} {:>10.3e} {:>10.3e}{}",
                    r.dx,
                    r.variant.tag(),
                    r.steps,
                    r.iterations,
                    e.density.sup,
                    e.density.l2,
                    e.value.sup,
                    e.value.l2,
                    if r.converged { "" } else { "  (not converged)" }
                )
            })?;
            println!("wrote {}", cfg.output.join("sweep.csv").display());
        }
        Command::Check { config } => {
            let cfg = load(&config, None)?;
            let (cells, steps) = cli::check(&cfg)?;
            println!("ok: problem={} cells={cells} steps={steps}", cfg.problem.name());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
