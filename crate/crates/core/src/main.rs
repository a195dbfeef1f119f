use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tcl_mfc::experiment::{run_experiment, ExperimentConfig};
use tcl_mfc::heater::{synth_drain_profile, write_drain_profile, SynthDrainConfig};
use tcl_mfc::Error;

#[derive(Parser)]
#[command(name = "tcl-mfc", version, about = "Mean-field control of water-heater fleets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline of a config and write its artifacts.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write a synthetic one-day drain profile.
    SynthDrain {
        seed: u64,
        out: PathBuf,
        #[arg(long, default_value_t = 144)]
        steps: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn fail(path: &Path, e: Error) -> ExitCode {
    eprintln!("error: {}: {e}", path.display());
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => match run_experiment(&config) {
            Ok(s) => {
                println!(
                    "{}: objective {:e} (nominal {:e}), artifacts in {}",
                    s.solver.name(),
                    s.objective,
                    s.nominal_objective,
                    s.output_dir.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(&config, e),
        },
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                let v = cfg.violations();
                if v.is_empty() {
                    println!("{}: ok", config.display());
                    ExitCode::SUCCESS
                } else {
                    for line in &v {
                        println!("{line}");
                    }
                    ExitCode::from(1)
                }
            }
            Err(e) => fail(&config, e),
        },
        Command::SynthDrain { seed, out, steps } => {
            let cfg = SynthDrainConfig::default();
            match synth_drain_profile(seed, steps, &cfg).and_then(|p| write_drain_profile(&p, &out)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(&out, e),
            }
        }
    }
}
