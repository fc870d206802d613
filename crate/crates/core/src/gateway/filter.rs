use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

/// One line-to-lines transformation of a syntax gateway.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterSpec {
    /// Replace every `marker` with newline, `prompt`, newline.
    PromptInject { marker: char, prompt: String },
    /// Drop empty lines.
    BlankLineDrop,
    /// `X^-12` becomes `X^(-12)`.
    NegPowerParenthesize,
    /// `^` becomes `**`.
    PowerToDoubleStar,
    /// `**` becomes `^`.
    DoubleStarToCaret,
    /// Glue lines together until `marker`, then emit the joined text
    /// followed by a `prompt` line.
    LineJoinUntilMarker { marker: char, prompt: String },
}

pub const DEFAULT_MARKER: char = '$';
pub const DEFAULT_PROMPT: &str = "P";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterParseError {
    #[error("unknown filter {0:?}")]
    UnknownFilter(String),
    #[error("filter {0} takes no arguments")]
    UnexpectedArgs(String),
    #[error("end marker must be a single ASCII character, got {0:?}")]
    BadMarker(String),
}

impl FromStr for FilterSpec {
    type Err = FilterParseError;

    /// `name[:marker[:prompt]]`, e.g. `prompt-inject:$:P` or `neg-power`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(3, ':');
        let name = parts.next().unwrap_or_default();
        let marker = parts.next();
        let prompt = parts.next();
        let marked = |make: fn(char, String) -> FilterSpec| {
            let marker = match marker {
                None => DEFAULT_MARKER,
                Some(m) if m.len() == 1 && m.is_ascii() => m.chars().next().unwrap(),
                Some(m) => return Err(FilterParseError::BadMarker(m.to_string())),
            };
            Ok(make(marker, prompt.unwrap_or(DEFAULT_PROMPT).to_string()))
        };
        let plain = |spec: FilterSpec| {
            if marker.is_some() {
                Err(FilterParseError::UnexpectedArgs(name.to_string()))
            } else {
                Ok(spec)
            }
        };
        match name {
            "prompt-inject" => marked(|marker, prompt| FilterSpec::PromptInject { marker, prompt }),
            "line-join" => marked(|marker, prompt| FilterSpec::LineJoinUntilMarker { marker, prompt }),
            "blank-drop" => plain(FilterSpec::BlankLineDrop),
            "neg-power" => plain(FilterSpec::NegPowerParenthesize),
            "pow-to-dstar" => plain(FilterSpec::PowerToDoubleStar),
            "dstar-to-pow" => plain(FilterSpec::DoubleStarToCaret),
            other => Err(FilterParseError::UnknownFilter(other.to_string())),
        }
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::PromptInject { marker, prompt } => write!(f, "prompt-inject:{marker}:{prompt}"),
            FilterSpec::BlankLineDrop => f.write_str("blank-drop"),
            FilterSpec::NegPowerParenthesize => f.write_str("neg-power"),
            FilterSpec::PowerToDoubleStar => f.write_str("pow-to-dstar"),
            FilterSpec::DoubleStarToCaret => f.write_str("dstar-to-pow"),
            FilterSpec::LineJoinUntilMarker { marker, prompt } => write!(f, "line-join:{marker}:{prompt}"),
        }
    }
}

/// A streaming transformer over lines (newline terminators excluded).
pub trait LineFilter {
    /// Consumes one input line and appends whatever it produces to `out`.
    fn push_line(&mut self, line: &str, out: &mut Vec<String>);

    /// Called at end of input to release buffered text.
    fn finish(&mut self, _out: &mut Vec<String>) {}
}

static NEG_POWER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\^-([0-9]+)").unwrap());
static SYMBOLIC_NEG_POWER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\^-[^0-9]").unwrap());

/// Splits `text` with each `marker` replaced by a `prompt` line. A marker at
/// the very end does not produce a trailing empty line.
fn inject_prompt(text: &str, marker: char, prompt: &str, out: &mut Vec<String>) {
    let replaced = text.replace(marker, &format!("\n{prompt}\n"));
    let body = replaced.strip_suffix('\n').unwrap_or(&replaced);
    out.extend(body.split('\n').map(str::to_string));
}

/// A [`FilterSpec`] with its running state.
#[derive(Debug, Clone)]
pub struct Filter {
    spec: FilterSpec,
    pending: String,
}

impl Filter {
    pub fn new(spec: FilterSpec) -> Self {
        Filter {
            spec,
            pending: String::new(),
        }
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }
}

impl LineFilter for Filter {
    fn push_line(&mut self, line: &str, out: &mut Vec<String>) {
        match &self.spec {
            FilterSpec::PromptInject { marker, prompt } => inject_prompt(line, *marker, prompt, out),
            FilterSpec::BlankLineDrop => {
                if !line.is_empty() {
                    out.push(line.to_string());
                }
            }
            FilterSpec::NegPowerParenthesize => {
                if SYMBOLIC_NEG_POWER.is_match(line) {
                    log::warn!("symbolic negative exponent left as is: {line}");
                }
                out.push(NEG_POWER.replace_all(line, "^(-$1)").into_owned());
            }
            FilterSpec::PowerToDoubleStar => out.push(line.replace('^', "**")),
            FilterSpec::DoubleStarToCaret => out.push(line.replace("**", "^")),
            FilterSpec::LineJoinUntilMarker { marker, prompt } => {
                self.pending.push_str(line);
                while let Some(at) = self.pending.find(*marker) {
                    let rest = self.pending.split_off(at + marker.len_utf8());
                    self.pending.truncate(at);
                    out.push(std::mem::replace(&mut self.pending, rest));
                    out.push(prompt.clone());
                }
            }
        }
    }

    fn finish(&mut self, out: &mut Vec<String>) {
        if !self.pending.is_empty() {
            out.push(std::mem::take(&mut self.pending));
        }
    }
}

/// Applies one filter to one line with fresh state.
pub fn run_filter(spec: &FilterSpec, line: &str) -> Vec<String> {
    let mut out = Vec::new();
    Filter::new(spec.clone()).push_line(line, &mut out);
    out
}

/// Left-to-right chain of filters; itself a [`LineFilter`], so pipelines
/// nest.
#[derive(Default)]
pub struct Pipeline {
    stages: Vec<Box<dyn LineFilter + Send>>,
}

impl Pipeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_specs<'a>(specs: impl IntoIterator<Item = &'a FilterSpec>) -> Self {
        let mut p = Pipeline::new();
        for spec in specs {
            p.push(Filter::new(spec.clone()));
        }
        p
    }

    pub fn push(&mut self, stage: impl LineFilter + Send + 'static) -> &mut Self {
        self.stages.push(Box::new(stage));
        self
    }

    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Convenience: runs `lines` through the pipeline, finishing at the end.
    pub fn run_all<S: AsRef<str>>(&mut self, lines: &[S]) -> Vec<String> {
        let mut out = Vec::new();
        for line in lines {
            self.push_line(line.as_ref(), &mut out);
        }
        self.finish(&mut out);
        out
    }
}

impl LineFilter for Pipeline {
    fn push_line(&mut self, line: &str, out: &mut Vec<String>) {
        let mut current = vec![line.to_string()];
        for stage in &mut self.stages {
            let mut next = Vec::new();
            for l in &current {
                stage.push_line(l, &mut next);
            }
            current = next;
        }
        out.extend(current);
    }

    fn finish(&mut self, out: &mut Vec<String>) {
        // flush stage i, then feed its leftovers through stages i+1..
        let mut carried: Vec<String> = Vec::new();
        for stage in &mut self.stages {
            let mut next = Vec::new();
            for l in &carried {
                stage.push_line(l, &mut next);
            }
            stage.finish(&mut next);
            carried = next;
        }
        out.extend(carried);
    }
}

/// Streams `input` through `filter` into `output`, writing and flushing the
/// results of each line before reading the next one.
pub fn compose<R: BufRead, W: Write>(
    filter: &mut dyn LineFilter,
    mut input: R,
    mut output: W,
) -> io::Result<()> {
    let mut buf = Vec::new();
    let mut out = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        let line = String::from_utf8_lossy(&buf);
        filter.push_line(&line, &mut out);
        for l in out.drain(..) {
            writeln!(output, "{l}")?;
        }
        output.flush()?;
    }
    filter.finish(&mut out);
    for l in out.drain(..) {
        writeln!(output, "{l}")?;
    }
    output.flush()
}
