use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qlap_core::harness::{self, RunConfig, RunStatus, SuiteSize};
use qlap_core::spectral::Target;

#[derive(Parser)]
#[command(name = "qlap", version, about = "Block-encoded graph Laplacian eigensolver, simulated")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline described by a config file and write a JSON report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop after classical and block-encoding verification.
        #[arg(long)]
        verify_only: bool,
        #[arg(long, value_parser = parse_target)]
        target: Option<Target>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every invariant suite and write one JSON line per check.
    Verify {
        #[arg(long, default_value = "small", value_parser = parse_size)]
        sizes: SuiteSize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse().map_err(|e: qlap_core::Error| e.to_string())
}

fn parse_size(s: &str) -> Result<SuiteSize, String> {
    s.parse().map_err(|e: qlap_core::Error| e.to_string())
}

fn exit(status: RunStatus) -> ExitCode {
    ExitCode::from(status.exit_code() as u8)
}

fn run(config: PathBuf, verify_only: bool, target: Option<Target>, seed: Option<u64>, out: Option<PathBuf>) -> ExitCode {
    let mut cfg = match RunConfig::load(&config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("qlap: {e}");
            return exit(RunStatus::IoOrConfig);
        }
    };
    cfg.verify_only |= verify_only;
    if let Some(t) = target {
        cfg.target = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output = o;
    }
    let outcome = harness::run(&cfg);
    match outcome.status {
        RunStatus::Ok => {
            println!("{outcome}");
            println!("report written to {}", cfg.output.display());
        }
        _ => eprintln!("qlap: {outcome}"),
    }
    exit(outcome.status)
}

fn verify(sizes: SuiteSize, out: Option<PathBuf>) -> ExitCode {
    let lines = harness::verify_suite(sizes);
    let text = harness::suite_to_jsonl(&lines);
    match out {
        Some(path) => {
            if let Err(e) = harness::write_atomic(&path, text.as_bytes()) {
                eprintln!("qlap: {e}");
                return exit(RunStatus::IoOrConfig);
            }
        }
        None => print!("{text}"),
    }
    let failed = lines.iter().filter(|l| !l.pass).count();
    eprintln!("{} checks, {failed} failed", lines.len());
    exit(if failed == 0 { RunStatus::Ok } else { RunStatus::VerificationFailed })
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, verify_only, target, seed, out } => run(config, verify_only, target, seed, out),
        Command::Verify { sizes, out } => verify(sizes, out),
    }
}
