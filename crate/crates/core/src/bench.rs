//! Three ways of asking the mock CAS the same question many times:
//! a fresh child talking through files, a fresh child talking through a
//! pipe, or one long-lived channel.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::cas::WITH_GCD;
use crate::channel::ChannelRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// Write `finput`, run `cat finput | mockcas > foutput`, read `foutput`.
    System,
    /// Run `echo <expr> | mockcas` and capture its output.
    Pipe,
    /// One channel, one framed exchange per iteration.
    External,
}

impl FromStr for BenchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(BenchMode::System),
            "pipe" => Ok(BenchMode::Pipe),
            "external" => Ok(BenchMode::External),
            other => Err(format!("unknown mode {other:?} (system, pipe or external)")),
        }
    }
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::System => "system",
            BenchMode::Pipe => "pipe",
            BenchMode::External => "external",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub mode: BenchMode,
    pub iterations: usize,
    pub startup_delay: Duration,
    /// Path of the `mockcas` executable.
    pub mockcas: PathBuf,
    pub expression: String,
}

impl BenchConfig {
    pub fn new(mode: BenchMode, mockcas: impl Into<PathBuf>) -> Self {
        BenchConfig {
            mode,
            iterations: 200,
            startup_delay: Duration::ZERO,
            mockcas: mockcas.into(),
            expression: WITH_GCD.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub iterations: usize,
    /// Wall clock for the whole run, including setup.
    pub total_ms: f64,
    pub min_ms: f64,
    pub median_ms: f64,
    /// The reply every iteration agreed on; `None` when nothing ran.
    pub answer: Option<String>,
}

impl BenchReport {
    fn from_samples(mode: BenchMode, samples: &[Duration], total: Duration, answer: Option<String>) -> Self {
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let median_ms = match ms.len() {
            0 => 0.0,
            n if n % 2 == 1 => ms[n / 2],
            n => (ms[n / 2 - 1] + ms[n / 2]) / 2.0,
        };
        BenchReport {
            mode,
            iterations: samples.len(),
            total_ms: total.as_secs_f64() * 1e3,
            min_ms: ms.first().copied().unwrap_or(0.0),
            median_ms,
            answer,
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("iteration {iteration}: {message}")]
    ChildFailure {
        iteration: usize,
        message: String,
        /// Statistics for the iterations that completed.
        partial: Box<BenchReport>,
    },
    #[error("setup: {0}")]
    Setup(String),
}

/// Quotes `s` for `/bin/sh`.
fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn mockcas_command(cfg: &BenchConfig) -> String {
    format!(
        "{} --startup-delay {}",
        shell_quote(&cfg.mockcas.to_string_lossy()),
        cfg.startup_delay.as_millis()
    )
}

/// The reply line of a one-shot mockcas run: everything before the prompt.
fn first_line(output: &[u8]) -> String {
    let text = String::from_utf8_lossy(output);
    text.lines().next().unwrap_or_default().to_string()
}

fn run_sh(command: &str, dir: Option<&Path>) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new("/bin/sh");
    cmd.arg("-c").arg(command).stdin(Stdio::null()).stderr(Stdio::inherit());
    if let Some(dir) = dir {
        cmd.current_dir(dir);
    }
    let out = cmd.output().map_err(|e| format!("cannot run /bin/sh: {e}"))?;
    if !out.status.success() {
        return Err(format!("{command:?} exited with {}", out.status));
    }
    Ok(out.stdout)
}

/// One measured exchange, returning the answer text.
trait Exchange {
    fn once(&mut self) -> Result<String, String>;
}

struct SystemMode {
    dir: tempfile::TempDir,
    command: String,
    expression: String,
}

impl Exchange for SystemMode {
    fn once(&mut self) -> Result<String, String> {
        let input = self.dir.path().join("finput");
        let output = self.dir.path().join("foutput");
        fs::write(&input, format!("{}\n", self.expression)).map_err(|e| format!("finput: {e}"))?;
        run_sh(&format!("cat finput | {} > foutput", self.command), Some(self.dir.path()))?;
        let reply = fs::read(&output).map_err(|e| format!("foutput: {e}"))?;
        // otherwise the next pass would append to it
        fs::remove_file(&input).map_err(|e| format!("finput: {e}"))?;
        Ok(first_line(&reply))
    }
}

struct PipeMode {
    command: String,
}

impl Exchange for PipeMode {
    fn once(&mut self) -> Result<String, String> {
        run_sh(&self.command, None).map(|out| first_line(&out))
    }
}

struct ExternalMode {
    registry: ChannelRegistry,
    request: Vec<u8>,
}

impl Exchange for ExternalMode {
    fn once(&mut self) -> Result<String, String> {
        self.registry.send(&self.request).map_err(|e| e.to_string())?;
        let reply = self.registry.read_until_prompt(None).map_err(|e| e.to_string())?;
        Ok(String::from_utf8_lossy(&reply).into_owned())
    }
}

/// Runs `cfg.iterations` exchanges in the configured mode. Every iteration
/// must produce the same answer.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    let start = Instant::now();
    let mut exchange: Box<dyn Exchange> = match cfg.mode {
        BenchMode::System => Box::new(SystemMode {
            dir: tempfile::tempdir().map_err(|e| BenchError::Setup(e.to_string()))?,
            command: mockcas_command(cfg),
            expression: cfg.expression.clone(),
        }),
        BenchMode::Pipe => Box::new(PipeMode {
            command: format!("echo {} | {}", shell_quote(&cfg.expression), mockcas_command(cfg)),
        }),
        BenchMode::External => {
            let mut registry = ChannelRegistry::new();
            if cfg.iterations > 0 {
                registry
                    .open_channel(&mockcas_command(cfg))
                    .map_err(|e| BenchError::Setup(e.to_string()))?;
            }
            Box::new(ExternalMode {
                registry,
                request: format!("{}\n", cfg.expression).into_bytes(),
            })
        }
    };
    let mut samples = Vec::with_capacity(cfg.iterations);
    let mut answer: Option<String> = None;
    for iteration in 0..cfg.iterations {
        let t = Instant::now();
        let result = exchange.once().and_then(|got| match &answer {
            Some(expected) if *expected != got => {
                Err(format!("answer changed from {expected:?} to {got:?}"))
            }
            _ => Ok(got),
        });
        match result {
            Ok(got) => {
                samples.push(t.elapsed());
                answer.get_or_insert(got);
            }
            Err(message) => {
                let partial = BenchReport::from_samples(cfg.mode, &samples, start.elapsed(), answer);
                return Err(BenchError::ChildFailure {
                    iteration,
                    message,
                    partial: Box::new(partial),
                });
            }
        }
    }
    drop(exchange);
    Ok(BenchReport::from_samples(cfg.mode, &samples, start.elapsed(), answer))
}
