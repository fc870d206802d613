//! Times the system, pipe and external ways of querying `mockcas`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use extlink_core::bench::{run_benchmark, BenchConfig, BenchError, BenchMode, BenchReport};

#[derive(Parser, Debug)]
#[command(name = "extbench", version, about = "Benchmark the three interaction modes against mockcas")]
struct Args {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["system", "pipe", "external"]))]
    mode: String,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// mockcas start-up delay in milliseconds.
    #[arg(long, value_name = "MS", default_value_t = 0)]
    startup_delay: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// mockcas executable; defaults to the one next to this program.
    #[arg(long)]
    mockcas: Option<PathBuf>,
}

fn sibling_mockcas() -> PathBuf {
    std::env::current_exe()
        .ok()
        .and_then(|exe| exe.parent().map(|dir| dir.join("mockcas")))
        .unwrap_or_else(|| PathBuf::from("mockcas"))
}

fn print_report(report: &BenchReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string(report).expect("report serializes"));
    } else {
        println!(
            "{} x{}: total {:.1} ms, min {:.3} ms, median {:.3} ms, answer {}",
            report.mode,
            report.iterations,
            report.total_ms,
            report.min_ms,
            report.median_ms,
            report.answer.as_deref().unwrap_or("-"),
        );
    }
}

fn main() -> ExitCode {
    extlink_cli::init_logging();
    let args = Args::parse();
    let mode: BenchMode = args.mode.parse().expect("validated by clap");
    let mut cfg = BenchConfig::new(mode, args.mockcas.unwrap_or_else(sibling_mockcas));
    cfg.iterations = args.iterations;
    cfg.startup_delay = Duration::from_millis(args.startup_delay);
    match run_benchmark(&cfg) {
        Ok(report) => {
            print_report(&report, args.json);
            ExitCode::SUCCESS
        }
        Err(BenchError::ChildFailure { iteration, message, partial }) => {
            eprintln!("extbench: iteration {iteration} failed: {message}");
            print_report(&partial, args.json);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("extbench: {e}");
            ExitCode::from(1)
        }
    }
}
