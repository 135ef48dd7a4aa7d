use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toom_cli::commands::{self, CompareOptions, SimulateOptions, SimulateOutcome, TheoryOptions};
use toom_cli::{CliError, CliResult, PartialRunConfig, Tolerances};
use toom_core::protocol::RingCheckPlan;

#[derive(Parser)]
#[command(
    name = "toom",
    version,
    about = "Anchored Toom interface: simulation and theory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the scaling coefficients for one λ.
    Coeffs {
        #[arg(long)]
        lambda: f64,
        /// Print name,value CSV instead of a table.
        #[arg(long)]
        csv: bool,
    },
    /// Half-line interface run with scheduled sampling and checkpoints.
    Simulate {
        /// JSON run configuration; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: PartialRunConfig,
        /// Continue from checkpoint.json in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop with a checkpoint once this simulation time is reached.
        #[arg(long)]
        stop_after: Option<f64>,
    },
    /// Currents, correlations and current fluctuations on a ring.
    RingCheck {
        #[arg(long, default_value_t = 0.125)]
        lambda: f64,
        #[arg(long, default_value_t = 4096)]
        size: usize,
        #[arg(long)]
        seed: u64,
        /// Duration of each current measurement.
        #[arg(long, default_value_t = 1e4)]
        duration: f64,
        #[arg(long, default_value_t = 4)]
        words: usize,
        #[arg(long, default_value_t = 10)]
        time_batches: usize,
        #[arg(long, default_value_t = 1000.0)]
        variance_time: f64,
        #[arg(long, default_value_t = 128)]
        variance_words: usize,
        #[arg(long, default_value_t = 4)]
        variance_bonds: usize,
        /// Additional magnetizations at which to measure the current.
        #[arg(long = "magnetization", allow_negative_numbers = true)]
        magnetizations: Vec<f64>,
        /// Only measure the currents given with --magnetization.
        #[arg(long)]
        only_extra: bool,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Tracy–Widom GOE and g₁ tables.
    Theory {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        nodes: usize,
        #[arg(long, default_value_t = 12.0)]
        span: f64,
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        s_min: f64,
        #[arg(long, default_value_t = 4.0)]
        s_max: f64,
        #[arg(long, default_value_t = 0.05)]
        s_step: f64,
        #[arg(long, default_value_t = 1.5)]
        t_max: f64,
        /// Number of g₁ intervals; 0 skips g1.csv.
        #[arg(long, default_value_t = 30)]
        t_steps: usize,
    },
    /// Compare recorded samples with the theory.
    Compare {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        structure: Option<PathBuf>,
        /// g1.csv from `theory`; computed when omitted.
        #[arg(long)]
        g1: Option<PathBuf>,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        batches: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.02)]
        density_tolerance: f64,
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
        #[arg(long, default_value_t = 0.02)]
        covariance_allowance: f64,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Coeffs { lambda, csv } => {
            let out = commands::coeffs(lambda)?;
            if out.degenerate {
                eprintln!("warning: lambda = 1 is the symmetric point; Gamma_tilde = 0 and the GOE rescaling is degenerate");
            }
            if csv {
                println!("name,value");
                for (k, v) in out.rows() {
                    println!("{k},{v}");
                }
            } else {
                print!("{}", out.table());
            }
        }
        Command::Simulate {
            config,
            flags,
            resume,
            stop_after,
        } => {
            let base = match config {
                Some(p) => PartialRunConfig::from_file(&p)?,
                None => PartialRunConfig::default(),
            };
            let cfg = base.overlay(flags).resolve()?;
            match commands::simulate(&cfg, SimulateOptions { resume, stop_after })? {
                SimulateOutcome::Finished { summary, .. } => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&summary).expect("serializable")
                    );
                }
                SimulateOutcome::Stopped { clock } => {
                    println!("stopped at t = {clock}; resume with --resume");
                }
            }
        }
        Command::RingCheck {
            lambda,
            size,
            seed,
            duration,
            words,
            time_batches,
            variance_time,
            variance_words,
            variance_bonds,
            magnetizations,
            only_extra,
            json,
        } => {
            let plan = RingCheckPlan {
                size,
                current_time: duration,
                current_words: words,
                time_batches,
                max_lag: 4,
                variance_time,
                variance_words,
                variance_bonds,
            };
            let out = commands::ring(&plan, lambda, seed, &magnetizations, only_extra)?;
            print!("{}", out.text(3.0));
            if let Some(p) = json {
                let value = serde_json::json!({ "standard": out.report, "extra": out.extra });
                toom_cli::io::write_json(&p, &value)?;
            }
        }
        Command::Theory {
            out,
            nodes,
            span,
            s_min,
            s_max,
            s_step,
            t_max,
            t_steps,
        } => {
            let o = TheoryOptions {
                nodes,
                span,
                s_min,
                s_max,
                s_step,
                t_max,
                t_steps,
            };
            let m = commands::theory(&out, &o)?;
            println!(
                "mean {:.7}  variance {:.7}  skewness {:.7}  kurtosis {:.7}",
                m[0], m[1], m[2], m[3]
            );
        }
        Command::Compare {
            samples,
            structure,
            g1,
            lambda,
            n,
            batches,
            out,
            density_tolerance,
            sigmas,
            covariance_allowance,
        } => {
            let report = commands::compare_files(&CompareOptions {
                samples,
                structure,
                g1,
                lambda,
                n,
                batches,
                out,
                tolerances: Tolerances {
                    density_sup: density_tolerance,
                    sigmas,
                    covariance_allowance,
                    ..Tolerances::default()
                },
            })?;
            print!("{}", report.summary());
            if !report.passes() {
                return Err(CliError::Tolerance(report.failures().join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
