use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wavefirst::io::{exit_code, run_design, run_modes, run_simulate, RunConfig};
use wavefirst::Error;

/// Objective-first photonic inverse design on a 2D FDFD grid.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Design a device and validate it by simulation.
    Design { config: PathBuf },
    /// Simulate a structure under the device's excitation.
    Simulate {
        config: PathBuf,
        /// Permittivity grid file; overrides `structure_file`.
        #[arg(long)]
        structure: Option<PathBuf>,
    },
    /// List the guided modes of a slice.
    Modes { config: PathBuf },
}

/// Cap on parallel field solves from `WAVEFIRST_THREADS`.
fn thread_cap() -> Result<Option<usize>, Error> {
    match std::env::var("WAVEFIRST_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("WAVEFIRST_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = match &cli.command {
        Command::Design { config } | Command::Simulate { config, .. } | Command::Modes { config } => config,
    };
    let cfg = RunConfig::read(config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Design { .. } => {
            let r = run_design(&cfg, &out, thread_cap()?)?;
            let t = &r.outcome.trace;
            println!(
                "{}: {} iterations, final residual {:.6e}",
                r.device.name,
                t.records.len(),
                t.final_residual().unwrap_or(f64::NAN)
            );
            report(&r.evaluations);
        }
        Command::Simulate { structure, .. } => {
            let dir = config.parent().unwrap_or(Path::new("."));
            let r = run_simulate(&cfg, dir, structure.as_deref(), &out)?;
            for (k, e) in r.evaluations.iter().enumerate() {
                println!("objective {k}: relative residual {:.3e}", e.solve.relative_residual);
            }
            report(&r.evaluations);
        }
        Command::Modes { .. } => {
            print!("{}", run_modes(&cfg, &out)?.table());
        }
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn report(evals: &[wavefirst::devices::Evaluated]) {
    for (k, e) in evals.iter().enumerate() {
        if let Some(eff) = e.total_efficiency() {
            println!("objective {k}: efficiency {eff:.6}");
        }
        if let Some(err) = &e.error {
            println!("objective {k}: relative error {:.6} at column {}", err.relative_error, err.plane);
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
