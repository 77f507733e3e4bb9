//! `incbeam`: Monte-Carlo runs, oracle verification and cost sweeps for
//! incremental QoS beamforming.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration error, 3 a
//! verification check failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use incbeam_core::harness::{self, bench, report, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "incbeam", version, about = "Incremental multi-user MISO beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average transmit power against the SINR target for each scheme.
    Run(Common),
    /// Compare incremental updates with from-scratch designs.
    Verify(Common),
    /// Measure update costs and fit log-log exponents.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// File of key=value lines; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// user_in, user_out or gamma_change.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated subset of MRT,ZF,OPT_exact,OPT_eq8,OPT_eq9,full_redesign.
    #[arg(long)]
    schemes: Option<String>,
    /// Output path; the table goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit timestamps and timings so identical inputs give identical bytes.
    #[arg(long)]
    deterministic: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("nt", self.nt.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("drops", self.drops.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("scenario", self.scenario.clone()),
            ("schemes", self.schemes.clone()),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> Result<(), HarnessError> {
        match &self.out {
            Some(path) => Ok(std::fs::write(path, text)?),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn run(args: &Common) -> Result<ExitCode, HarnessError> {
    let cfg = args.config()?;
    let out = harness::run_experiment(&cfg, harness::threads_from_env()?)?;
    match &args.out {
        Some(path) => {
            report::write_outputs(&out, path, args.deterministic)?;
            eprintln!("wrote {} rows to {}", out.rows.len(), path.display());
        }
        None => print!("{}", report::csv(&out.rows, args.deterministic)),
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: &Common) -> Result<ExitCode, HarnessError> {
    let cfg = args.config()?;
    let report = harness::verify(&cfg, harness::threads_from_env()?)?;
    args.emit(&report.to_string())?;
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn bench(args: &Common) -> Result<ExitCode, HarnessError> {
    let cfg = args.config()?;
    let series = bench::bench(&cfg)?;
    eprint!("{}", bench::points_csv(&series));
    args.emit(&bench::slopes_table(&series))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("incbeam: {e}");
            match e {
                HarnessError::Config(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
