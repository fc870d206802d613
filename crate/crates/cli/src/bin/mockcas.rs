//! A tiny computer-algebra child: reads one univariate rational expression
//! per line, prints it with the numerator/denominator GCD cancelled, then a
//! prompt line.

use std::io;
use std::time::Duration;

use clap::Parser;
use extlink_core::cas::{mockcas_serve, ServeOptions, TermOrder};

#[derive(Parser, Debug)]
#[command(name = "mockcas", version, about = "Cancel polynomial GCDs, one expression per line")]
struct Args {
    /// Line printed after every reply.
    #[arg(long, default_value = "")]
    prompt: String,
    /// Milliseconds to sleep before reading the first line.
    #[arg(long, value_name = "MS", default_value_t = 0)]
    startup_delay: u64,
    /// Print terms highest degree first (`2*d+3` instead of `3+2*d`).
    #[arg(long)]
    descending: bool,
}

fn main() -> io::Result<()> {
    extlink_cli::init_logging();
    let args = Args::parse();
    let opts = ServeOptions {
        prompt: args.prompt,
        startup_delay: Duration::from_millis(args.startup_delay),
        order: if args.descending { TermOrder::Descending } else { TermOrder::Ascending },
    };
    match mockcas_serve(io::stdin().lock(), io::stdout().lock(), &opts) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}
