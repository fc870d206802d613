//! Line-buffered syntax gateway.
//!
//! `gateway --filter neg-power --filter pow-to-dstar` rewrites standard input
//! to standard output, one flushed line at a time. `gateway --mask` runs the
//! `acc()`/`dd(#)` masking gateway with its `@` commands, optionally passing
//! each masked expression through a simplifier child.

use std::io::{self, BufRead, Write};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use extlink_core::gateway::{compose, FilterSpec, Gateway, Pipeline, Simplifier};
use extlink_core::ChannelRegistry;

#[derive(Parser, Debug)]
#[command(name = "gateway", version, about = "Line-buffered syntax filters and the masking gateway")]
struct Args {
    /// Filter stage, applied in the order given: prompt-inject[:M[:P]],
    /// line-join[:M[:P]], blank-drop, neg-power, pow-to-dstar, dstar-to-pow.
    #[arg(long = "filter", value_name = "NAME[:ARGS]", conflicts_with = "mask")]
    filters: Vec<FilterSpec>,
    /// Run the masking gateway instead of filters.
    #[arg(long)]
    mask: bool,
    /// Command that simplifies masked expressions; started once.
    #[arg(long, value_name = "CMD", requires = "mask")]
    simplifier_cmd: Option<String>,
    /// Prompt line that ends each simplifier reply.
    #[arg(long, default_value = "", requires = "simplifier_cmd")]
    prompt: String,
    /// In mask mode, print this line after handling each input line so the
    /// gateway itself can be driven as a prompt-framed child.
    #[arg(long, value_name = "TEXT", requires = "mask")]
    reply_prompt: Option<String>,
}

fn run_mask(args: &Args) -> anyhow::Result<()> {
    let mut registry = ChannelRegistry::new();
    if let Some(cmd) = &args.simplifier_cmd {
        registry.set_prompt(args.prompt.as_bytes());
        registry
            .open_channel(cmd)
            .with_context(|| format!("starting simplifier {cmd:?}"))?;
    }
    let mut gateway = Gateway::new();
    let stdin = io::stdin();
    let mut out = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line?;
        let simplifier: Option<&mut dyn Simplifier> = match args.simplifier_cmd {
            Some(_) => Some(&mut registry),
            None => None,
        };
        match gateway.process_line(&line, simplifier) {
            Ok(lines) => {
                for l in lines {
                    writeln!(out, "{l}")?;
                }
            }
            Err(e) => {
                log::error!("{e}");
                writeln!(out, "ERROR: {e}")?;
            }
        }
        if let Some(prompt) = &args.reply_prompt {
            writeln!(out, "{prompt}")?;
        }
        out.flush()?;
    }
    registry.shutdown_all();
    Ok(())
}

fn main() -> ExitCode {
    extlink_cli::init_logging();
    let args = Args::parse();
    let result = if args.mask {
        run_mask(&args)
    } else {
        let mut pipeline = Pipeline::from_specs(&args.filters);
        compose(&mut pipeline, io::stdin().lock(), io::stdout().lock()).map_err(Into::into)
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gateway: {e:#}");
            ExitCode::from(1)
        }
    }
}
