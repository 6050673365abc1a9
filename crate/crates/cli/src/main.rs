//! `harmflow run <config.json>`, `harmflow sweep <config.json> --param N
//! --values 8,16,32`, `harmflow verify --n 4 --trials 1000 --seed 7`.
//!
//! Outputs go under `$HARMFLOW_OUTPUT_ROOT` (default: the current
//! directory). Exit status: 0 when every checked invariant passed, 1 on an
//! invariant failure or a failed run, 2 on a usage or configuration error.

mod config;
mod run;
mod summary;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{output_root, Mode, RunConfig, UsageError, VerifySettings};
use summary::Summary;
use sweep::Param;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "harmflow", version, about = "Minimizing-movement experiments for two-phase harmonic map flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a JSON config.
    Run { config: PathBuf },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Randomized checks of the interface algebra.
    Verify {
        /// Matrix sizes, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn report(summary: &Summary) -> ExitCode {
    for c in &summary.invariants {
        println!("{:<32} {:<4} {:e}", c.name, if c.passed { "ok" } else { "FAIL" }, c.value);
    }
    if summary.passed {
        println!("all invariants passed");
        ExitCode::SUCCESS
    } else {
        eprintln!("invariant failures: {}", summary.failures().join(", "));
        ExitCode::from(EXIT_FAIL)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let root = output_root();
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let out = cfg.output_dir(&root, Some(&config));
            let summary = run::execute(&cfg, &out)?;
            println!("outputs in {}", out.display());
            Ok(report(&summary))
        }
        Command::Sweep { config, param, values } => {
            let cfg = RunConfig::load(&config)?;
            let out = cfg.output_dir(&root, Some(&config));
            let rep = sweep::sweep(&cfg, param, &values, &out)?;
            for e in &rep.entries {
                println!("{} = {:<8} passed {:<5} gap {:e}", rep.param_label(), e.value, e.passed, e.gap_total);
            }
            if let Some(s) = rep.gap_slope {
                println!("gap-vs-h slope {s:.4}");
            }
            println!("outputs in {}", out.display());
            Ok(if rep.passed { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAIL) })
        }
        Command::Verify { n, trials, seed } => {
            let cfg = RunConfig {
                verify: Some(VerifySettings { ns: n.clone(), trials }),
                ..RunConfig::bare(Mode::Verify, seed)
            };
            cfg.validate().map_err(|e| config::usage(format!("{e:#}")))?;
            let label: Vec<String> = n.iter().map(usize::to_string).collect();
            let out = root.join(format!("verify_n{}_seed{seed}", label.join("-")));
            let summary = run::execute(&cfg, &out)?;
            println!("outputs in {}", out.display());
            Ok(report(&summary))
        }
    }
}

/// Configuration-shaped library errors exit with the usage status.
fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<UsageError>()
            || matches!(
                c.downcast_ref::<harmflow::Error>(),
                Some(
                    harmflow::Error::InvalidParameter { .. }
                        | harmflow::Error::Lifespan { .. }
                        | harmflow::Error::StepTooLarge { .. }
                        | harmflow::Error::Geometry(_)
                        | harmflow::Error::DimensionTooSmall(_)
                        | harmflow::Error::DimensionMismatch { .. }
                        | harmflow::Error::NonUnitAxis(_)
                        | harmflow::Error::Snapshot { .. }
                )
            )
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { EXIT_USAGE } else { EXIT_FAIL })
        }
    }
}
