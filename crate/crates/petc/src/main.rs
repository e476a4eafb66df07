use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use petc::commands::{self, RunOverrides};
use petc::{verify, CliError};

#[derive(Parser)]
#[command(name = "petc", version, about = "Periodic event-triggered consensus with delays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design gains and trigger constants and print the report as JSON.
    Synth {
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a scenario (or a directory of them) and write CSV logs.
    Run {
        /// Scenario file; omit with --batch.
        #[arg(required_unless_present = "batch")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, env = "PETC_OUT_DIR", default_value = "petc-out")]
        out_dir: PathBuf,
        /// Run every .json file of this directory in parallel.
        #[arg(long, conflicts_with = "config")]
        batch: Option<PathBuf>,
    },
    /// Run the randomized property suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Spectral,
    Errors,
    Delays,
    Bounds,
    All,
}

fn report_error(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { config, out } => {
            let report = match commands::synth(&config) {
                Ok(r) => r,
                Err(e) => return report_error(&e),
            };
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, text + "\n") {
                        return report_error(&e.into());
                    }
                }
                None => {
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, seed, duration, out_dir, batch } => {
            let overrides = RunOverrides { seed, duration };
            if let Some(dir) = batch {
                let results = match commands::run_batch(&dir, &overrides, &out_dir) {
                    Ok(r) => r,
                    Err(e) => return report_error(&e),
                };
                let mut code = 0u8;
                for (file, res) in results {
                    match res {
                        Ok(s) => {
                            println!("{}: exit {} ({} steps) -> {}", file.display(), s.exit_code, s.steps, s.out_dir.display());
                            code = code.max(s.exit_code);
                        }
                        Err(e) => {
                            println!("{}: exit {} ({e})", file.display(), e.exit_code());
                            code = code.max(e.exit_code());
                        }
                    }
                }
                return ExitCode::from(code);
            }
            let config = config.expect("clap requires a config without --batch");
            match commands::run(&config, &overrides, &out_dir) {
                Ok(s) => {
                    let g = &s.guarantees;
                    println!(
                        "{} steps, events {:?}, min inter-event {:?} s, envelope violations {}, tail bound violated {}, inter-event violations {}",
                        s.steps, g.event_counts, g.min_inter_event, g.envelope_violations, g.tail_bound_violated, g.inter_event_violations
                    );
                    println!("outputs in {}", s.out_dir.display());
                    if s.exit_code != 0 {
                        eprintln!("error: guarantee violated");
                    }
                    ExitCode::from(s.exit_code)
                }
                Err(e) => report_error(&e),
            }
        }
        Command::Verify { suite, seed } => {
            let names: Vec<&str> = match suite {
                Suite::Spectral => vec!["spectral"],
                Suite::Errors => vec!["errors"],
                Suite::Delays => vec!["delays"],
                Suite::Bounds => vec!["bounds"],
                Suite::All => verify::SUITES.to_vec(),
            };
            let mut ok = true;
            for name in names {
                let report = verify::run_suite(name, seed).expect("known suite");
                for line in report.lines() {
                    println!("{line}");
                }
                ok &= report.passed();
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
    }
}
