use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use inrr::harness::{implicit_bias_study, ntk_sweep, run_experiment, ExperimentConfig};
use inrr::Error;

#[derive(Parser)]
#[command(
    name = "inrr",
    version,
    about = "INR experiments with a learned Laplacian regularizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one inpaint/denoise/fit experiment.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a δ or ω0 sweep over missing rates.
    Sweep { config: PathBuf },
    /// Run an implicit-bias study.
    Bias { config: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => 2,
        Error::NonFiniteLoss { .. } | Error::NumericRange(_) | Error::Solver { .. } => 3,
        Error::Dimension { .. } | Error::Contract(_) => 1,
    }
}

fn execute(cli: Cli) -> inrr::Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            if let Some(o) = out {
                cfg.experiment.out_dir = o;
            }
            let report = run_experiment(&cfg, Some(&config))?;
            let m = report.final_metrics;
            println!(
                "step {} psnr {:.3} dB (all pixels {:.3} dB) observed_mse {:.3e} unobserved_mse {:.3e}",
                m.step, m.psnr, m.psnr_full, m.observed_mse, m.unobserved_mse
            );
            println!("artifacts written to {}", cfg.experiment.out_dir.display());
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = ntk_sweep(&cfg)?;
            print!("{}", report.to_csv());
        }
        Command::Bias { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for run in implicit_bias_study(&cfg)? {
                let (first, last) = (run.initial, run.log.last().unwrap());
                println!(
                    "{}: effective rank {:.3} -> {:.3}, psnr {:.3} -> {:.3} dB",
                    run.family.name(),
                    first.effective_rank,
                    last.effective_rank,
                    first.psnr,
                    last.psnr
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
