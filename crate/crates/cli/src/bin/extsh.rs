//! Runs a script of `#external`/`#toexternal`/`#fromexternal`... lines.
//!
//! Exit status: 0 on success, 1 on a script or handshake error, 2 on a
//! usage error.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use extlink_cli::{init_logging, normalize_pipe_flag};
use extlink_core::embed::{activate_preopened, parse_pipe_option, preopened_variables, DEFAULT_HANDSHAKE_TIMEOUT};
use extlink_core::script::{parse_script, Session, VariableTable};
use extlink_core::ChannelRegistry;

#[derive(Parser, Debug)]
#[command(name = "extsh", version, about = "Run an external-channel script")]
struct Args {
    /// Pre-opened descriptor pairs `r1,w1[,r2,w2...]` (also spelled `-pipe`).
    #[arg(long, value_name = "R,W,...")]
    pipe: Option<String>,
    /// Give up on a reply after this many seconds.
    #[arg(long, value_name = "SECONDS")]
    read_timeout: Option<f64>,
    /// Seconds to wait for each pre-opened channel's handshake reply.
    #[arg(long, value_name = "SECONDS", default_value_t = DEFAULT_HANDSHAKE_TIMEOUT.as_secs_f64())]
    handshake_timeout: f64,
    /// Print what `#fromexternal` reads unless the instruction says `-`.
    #[arg(long)]
    echo: bool,
    script: PathBuf,
}

fn seconds(value: f64, what: &str) -> anyhow::Result<Duration> {
    Duration::try_from_secs_f64(value).map_err(|_| anyhow::anyhow!("{what} must be a non-negative number of seconds"))
}

fn run(args: Args) -> anyhow::Result<()> {
    let mut registry = ChannelRegistry::new();
    let mut vars = VariableTable::new();
    if let Some(read_timeout) = args.read_timeout {
        registry.set_read_timeout(Some(seconds(read_timeout, "--read-timeout")?));
    }
    if let Some(pipe) = &args.pipe {
        let spec = parse_pipe_option(pipe)?;
        let timeout = seconds(args.handshake_timeout, "--handshake-timeout")?;
        let accepted = activate_preopened(&mut registry, &spec, timeout)?;
        for (name, value) in preopened_variables(&accepted) {
            vars.set(name, value);
        }
    }

    let source = std::fs::read_to_string(&args.script)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.script.display()))?;
    let program = parse_script(&source).map_err(|e| anyhow::anyhow!("{}: {e}", args.script.display()))?;

    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut session = Session::new(&mut registry, &mut vars, &mut out);
    session.echo = args.echo;
    let result = session.run(&program);
    drop(session);
    out.flush()?;
    registry.shutdown_all();
    result.map_err(|e| anyhow::anyhow!("{}: {e}", args.script.display()))
}

fn main() -> ExitCode {
    init_logging();
    let args = match Args::try_parse_from(normalize_pipe_flag(std::env::args_os())) {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("extsh: {e:#}");
            ExitCode::from(1)
        }
    }
}
