use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dpc_precoding::bench::{
    self, baseline_order_seed, cmd_certify, cmd_solve, load_instance, parse_order,
    parse_sample_spec, summary_to_csv, sweep_to_csv, BenchError, Method, SweepConfig,
};
use dpc_precoding::instance::{sample_rayleigh_instance, ProblemInstance};
use dpc_precoding::relaxation::RelaxationParams;

/// Minimum-power DPC beamforming and precoding-order selection.
///
/// Rates are in bits per channel use with unit noise, so sum powers also read
/// as transmit SNR. Average SNR in sweep summaries is 10 log10 of the mean
/// linear sum power over trials (mean taken before converting to dB).
#[derive(Parser)]
#[command(name = "dpc-precoding", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one or more methods and print a JSON report.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Comma-separated subset of random,heuristic,exhaustive,relaxation.
        #[arg(long, default_value = "relaxation")]
        method: String,
        #[command(flatten)]
        tuning: Tuning,
    },
    /// Run a Monte Carlo sweep described by a JSON config and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Row CSV path; the summary goes next to it as `<stem>.summary.csv`.
        /// Without it both tables are printed to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tuning: Tuning,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Certify a decoding order (0-based user indices, first decoded first).
    Certify {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        order: String,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Instance JSON file.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Rayleigh sample `M,NT,RATE,SEED` with equal targets RATE.
    #[arg(long)]
    sample: Option<String>,
}

#[derive(Args)]
struct Tuning {
    /// Relative dual-gap tolerance of the relaxation.
    #[arg(long)]
    tol: Option<f64>,
    /// Ellipsoid iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
}

impl Tuning {
    fn validate(&self) -> Result<(), BenchError> {
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(BenchError::Validation(format!(
                    "--tol must be positive, got {t}"
                )));
            }
        }
        if self.max_iters == Some(0) {
            return Err(BenchError::Validation(
                "--max-iters must be positive".into(),
            ));
        }
        Ok(())
    }

    fn params(&self) -> RelaxationParams {
        let mut p = RelaxationParams::default();
        if let Some(t) = self.tol {
            p.tol = t;
        }
        if let Some(n) = self.max_iters {
            p.max_iters = n;
        }
        p
    }
}

/// Returns the instance and the seed used for the random baseline order.
fn load(source: &Source) -> Result<(ProblemInstance, u64), BenchError> {
    if let Some(path) = &source.instance {
        return Ok((load_instance(path)?, baseline_order_seed(0)));
    }
    let spec = source.sample.as_deref().expect("clap enforces one source");
    let (m, nt, rate, seed) = parse_sample_spec(spec)?;
    let inst = sample_rayleigh_instance(m, nt, rate, seed)
        .map_err(|e| BenchError::Validation(e.to_string()))?;
    Ok((inst, baseline_order_seed(seed)))
}

fn emit(text: &str) -> Result<(), BenchError> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| BenchError::Io(format!("stdout: {e}")))
}

fn print_json(value: &impl serde::Serialize) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::Io(e.to_string()))?;
    emit(&(text + "\n"))
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Solve {
            source,
            method,
            tuning,
        } => {
            tuning.validate()?;
            let methods = Method::parse_list(&method)?;
            let (inst, order_seed) = load(&source)?;
            let report = cmd_solve(&inst, &methods, order_seed, &tuning.params())?;
            print_json(&report)?;
            if let Some(r) = report.results.iter().find(|r| !r.converged) {
                return Err(BenchError::Solver(format!(
                    "{} did not converge in {} iterations",
                    r.method.name(),
                    r.iterations
                )));
            }
            Ok(())
        }
        Command::Sweep {
            config,
            out,
            tuning,
            threads,
        } => {
            tuning.validate()?;
            if threads == Some(0) {
                return Err(BenchError::Validation("--threads must be positive".into()));
            }
            let text = std::fs::read_to_string(&config)
                .map_err(|e| BenchError::Io(format!("{}: {e}", config.display())))?;
            let mut cfg = SweepConfig::from_json(&text)
                .map_err(|e| BenchError::Validation(format!("{}: {e}", config.display())))?;
            cfg.tol = tuning.tol.or(cfg.tol);
            cfg.max_iters = tuning.max_iters.or(cfg.max_iters);
            cfg.validate()?;
            match out.or_else(|| cfg.out.clone()) {
                Some(path) => {
                    let (_, summary_path) = bench::write_sweep(&cfg, &path, threads)?;
                    eprintln!("wrote {} and {}", path.display(), summary_path.display());
                }
                None => {
                    let output = bench::run_sweep(&cfg, threads, |_| Ok(()))?;
                    emit(&format!(
                        "{}\n{}",
                        sweep_to_csv(&output.rows),
                        summary_to_csv(&output.summary)
                    ))?;
                }
            }
            Ok(())
        }
        Command::Certify { source, order } => {
            let (inst, _) = load(&source)?;
            let report = cmd_certify(&inst, &parse_order(&order)?)?;
            print_json(&report)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                BenchError::Validation(_) => "validation",
                BenchError::Solver(_) => "solver",
                BenchError::Io(_) => "io",
            };
            eprintln!(
                "{}",
                json!({ "error": { "kind": kind, "message": e.to_string() } })
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
