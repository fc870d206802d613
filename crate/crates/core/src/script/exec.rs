use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};

use thiserror::Error;

use super::parse::{parse_script, Instruction, Line, SyntaxError};
use super::vars::{expand_escapes, InterpolationError, VariableTable};
use crate::channel::{ChannelError, ChannelId, ChannelRegistry};

/// Spliced text may splice more text; this bounds the nesting.
pub const MAX_SPLICE_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error(transparent)]
    Interpolation(#[from] InterpolationError),
    #[error("in spliced text, {0}")]
    SplicedSyntax(SyntaxError),
    #[error("{what} must be an integer, got {text:?}")]
    BadNumber { what: &'static str, text: String },
    #[error("empty command")]
    EmptyCommand,
    #[error("spliced text nested deeper than {MAX_SPLICE_DEPTH}")]
    SpliceTooDeep,
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot run {command:?}: {source}")]
    Command {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("output: {0}")]
    Output(#[source] io::Error),
}

/// A run-time failure and the script line it is attributed to. Failures in
/// spliced text are reported at the instruction that spliced it.
#[derive(Debug, Error)]
#[error("line {line}: {kind}")]
pub struct ScriptError {
    pub line: usize,
    pub kind: ExecError,
}

/// Interpreter state for one run.
pub struct Session<'a> {
    registry: &'a mut ChannelRegistry,
    variables: &'a mut VariableTable,
    out: &'a mut dyn Write,
    /// Whether `#fromexternal` without `+`/`-` prints what it reads.
    pub echo: bool,
    locals: Vec<(String, String)>,
    statement: String,
    ended: bool,
    depth: usize,
}

fn parse_number<T: std::str::FromStr>(text: &str, what: &'static str) -> Result<T, ExecError> {
    text.trim().parse().map_err(|_| ExecError::BadNumber {
        what,
        text: text.to_string(),
    })
}

fn strip_ws(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

impl<'a> Session<'a> {
    pub fn new(
        registry: &'a mut ChannelRegistry,
        variables: &'a mut VariableTable,
        out: &'a mut dyn Write,
    ) -> Self {
        Session {
            registry,
            variables,
            out,
            echo: false,
            locals: Vec::new(),
            statement: String::new(),
            ended: false,
            depth: 0,
        }
    }

    /// Expressions defined so far by `Local` statements, in order.
    pub fn locals(&self) -> &[(String, String)] {
        &self.locals
    }

    /// True once `.end` has been executed.
    pub fn ended(&self) -> bool {
        self.ended
    }

    pub fn run(&mut self, program: &[Line]) -> Result<(), ScriptError> {
        self.run_block(program, None)?;
        if !self.statement.trim().is_empty() {
            log::warn!("unterminated statement at end of input: {}", self.statement.trim());
        }
        Ok(())
    }

    /// `origin` is the line that spliced this block, if any.
    fn run_block(&mut self, lines: &[Line], origin: Option<usize>) -> Result<(), ScriptError> {
        for line in lines {
            if self.ended {
                break;
            }
            let at = origin.unwrap_or(line.number);
            match &line.instr {
                Instruction::Do { var, from, to, body } => {
                    let from: i64 = self.bound(from).map_err(|kind| ScriptError { line: at, kind })?;
                    let to: i64 = self.bound(to).map_err(|kind| ScriptError { line: at, kind })?;
                    for i in from..=to {
                        if self.ended {
                            break;
                        }
                        self.variables.set(var.clone(), i.to_string());
                        self.run_block(body, origin)?;
                    }
                }
                instr => {
                    if let Some(spliced) = self.step(instr).map_err(|kind| ScriptError { line: at, kind })? {
                        self.splice(&spliced, at)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn bound(&self, text: &str) -> Result<i64, ExecError> {
        parse_number(&self.variables.interpolate(text)?, "#do bound")
    }

    fn splice(&mut self, text: &str, at: usize) -> Result<(), ScriptError> {
        if self.depth >= MAX_SPLICE_DEPTH {
            return Err(ScriptError { line: at, kind: ExecError::SpliceTooDeep });
        }
        let program = parse_script(text).map_err(|e| ScriptError {
            line: at,
            kind: ExecError::SplicedSyntax(e),
        })?;
        self.depth += 1;
        let result = self.run_block(&program, Some(at));
        self.depth -= 1;
        result
    }

    fn channel_id(&self, text: &str) -> Result<ChannelId, ExecError> {
        parse_number(&self.variables.interpolate(text)?, "channel descriptor")
    }

    fn print(&mut self, text: &str) -> Result<(), ExecError> {
        self.out.write_all(text.as_bytes()).map_err(ExecError::Output)?;
        if !text.ends_with('\n') {
            self.out.write_all(b"\n").map_err(ExecError::Output)?;
        }
        self.out.flush().map_err(ExecError::Output)
    }

    /// Runs one non-loop instruction; returns text to splice, if any.
    fn step(&mut self, instr: &Instruction) -> Result<Option<String>, ExecError> {
        let vars = &*self.variables;
        match instr {
            Instruction::Comment => {}
            Instruction::Data(text) => {
                let text = vars.interpolate(text)?;
                self.data_line(&text)?;
            }
            Instruction::External { var, command } => {
                let command = vars.interpolate(command)?;
                if command.trim().is_empty() {
                    return Err(ExecError::EmptyCommand);
                }
                let var = var.as_deref().map(|v| vars.interpolate(v)).transpose()?;
                let id = self.registry.open_channel(command.trim())?;
                if let Some(var) = var {
                    self.variables.set(var, id.to_string());
                }
            }
            Instruction::ToExternal(format) => {
                let payload = expand_escapes(&vars.interpolate(format)?);
                self.registry.send(payload.as_bytes())?;
            }
            Instruction::FromExternal { echo, target, maxlength } => {
                let maxlength = match maxlength {
                    Some(m) => Some(parse_number(&vars.interpolate(m)?, "maxlength")?),
                    None => None,
                };
                let target = target.as_deref().map(|t| vars.interpolate(t)).transpose()?;
                let reply = self.registry.read_until_prompt(maxlength)?;
                let text = String::from_utf8_lossy(&reply).into_owned();
                if echo.unwrap_or(self.echo) {
                    self.print(&text)?;
                }
                match target {
                    Some(name) => self.variables.set(name, text),
                    None => return Ok(Some(text)),
                }
            }
            Instruction::Prompt(text) => {
                let prompt = vars.interpolate(text)?;
                self.registry.set_prompt(prompt.as_bytes());
            }
            Instruction::SetExternal(id) => {
                let id = self.channel_id(id)?;
                self.registry.set_current(id)?;
            }
            Instruction::RmExternal(id) => {
                let id = id.as_deref().map(|t| self.channel_id(t)).transpose()?;
                self.registry.remove_channel(id)?;
            }
            Instruction::SetExternalAttr(spec) => {
                let spec = vars.interpolate(spec)?;
                self.registry.set_default_attrs(&spec)?;
            }
            Instruction::System(command) => {
                let command = vars.interpolate(command)?;
                let status = Command::new("/bin/sh")
                    .arg("-c")
                    .arg(&command)
                    .status()
                    .map_err(|source| ExecError::Command { command: command.clone(), source })?;
                if !status.success() {
                    log::info!("#system {command:?} exited with {status}");
                }
            }
            Instruction::Pipe(command) => {
                let command = vars.interpolate(command)?;
                let output = Command::new("/bin/sh")
                    .arg("-c")
                    .arg(&command)
                    .stdin(Stdio::null())
                    .stderr(Stdio::inherit())
                    .output()
                    .map_err(|source| ExecError::Command { command: command.clone(), source })?;
                if !output.status.success() {
                    log::info!("#pipe {command:?} exited with {}", output.status);
                }
                return Ok(Some(String::from_utf8_lossy(&output.stdout).into_owned()));
            }
            Instruction::Define { name, value } => {
                let name = vars.interpolate(name)?;
                let value = vars.interpolate(value)?;
                self.variables.set(name, value);
            }
            Instruction::WriteFile { path, format } => {
                let path = PathBuf::from(vars.interpolate(path)?);
                let mut text = expand_escapes(&vars.interpolate(format)?);
                text.push('\n');
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&path)
                    .and_then(|mut f| f.write_all(text.as_bytes()))
                    .map_err(|source| ExecError::File { path, source })?;
            }
            Instruction::RemoveFile(path) => {
                let path = PathBuf::from(vars.interpolate(path)?);
                match fs::remove_file(&path) {
                    Err(e) if e.kind() != io::ErrorKind::NotFound => {
                        return Err(ExecError::File { path, source: e })
                    }
                    _ => {}
                }
            }
            Instruction::Echo(format) => {
                let text = expand_escapes(&vars.interpolate(format)?);
                self.print(&text)?;
            }
            Instruction::Do { .. } => unreachable!("loops are run by run_block"),
        }
        Ok(None)
    }

    /// Feeds one data line to the statement accumulator. Statements end at
    /// `;`; lines starting with `.` are module ends.
    fn data_line(&mut self, text: &str) -> Result<(), ExecError> {
        let trimmed = text.trim();
        if self.statement.trim().is_empty() && trimmed.starts_with('.') {
            if trimmed.eq_ignore_ascii_case(".end") {
                self.ended = true;
            }
            return Ok(());
        }
        if !self.statement.is_empty() {
            self.statement.push(' ');
        }
        self.statement.push_str(trimmed);
        while let Some(end) = self.statement.find(';') {
            let stmt = self.statement[..end].trim().to_string();
            self.statement = self.statement[end + 1..].trim_start().to_string();
            self.statement_done(&stmt)?;
        }
        Ok(())
    }

    fn local_value(&self, name: &str) -> Option<&str> {
        self.locals
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn statement_done(&mut self, stmt: &str) -> Result<(), ExecError> {
        if let Some(dollar) = stmt.strip_prefix('$') {
            if let Some((name, rhs)) = dollar.split_once('=') {
                let rhs = strip_ws(rhs);
                let value = self.local_value(&rhs).map(str::to_string).unwrap_or(rhs);
                self.variables.set(format!("${}", name.trim()), value);
                return Ok(());
            }
        }
        let (keyword, args) = match stmt.find(|c: char| !c.is_ascii_alphabetic()) {
            Some(i) => (&stmt[..i], stmt[i..].trim()),
            None => (stmt, ""),
        };
        match keyword.to_ascii_lowercase().as_str() {
            "local" | "l" | "global" | "g" => {
                let Some((name, expr)) = args.split_once('=') else {
                    log::warn!("ignoring statement without '=': {stmt}");
                    return Ok(());
                };
                let (name, expr) = (name.trim().to_string(), strip_ws(expr));
                match self.locals.iter_mut().find(|(n, _)| *n == name) {
                    Some(entry) => entry.1 = expr,
                    None => self.locals.push((name, expr)),
                }
            }
            "print" => {
                let wanted: Vec<&str> = args.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                let lines: Vec<String> = self
                    .locals
                    .iter()
                    .filter(|(n, _)| wanted.is_empty() || wanted.contains(&n.as_str()))
                    .map(|(n, v)| format!("{n} = {v};"))
                    .collect();
                for line in lines {
                    self.print(&line)?;
                }
            }
            "drop" => {
                let names: Vec<&str> = args.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                self.locals.retain(|(n, _)| !names.is_empty() && !names.contains(&n.as_str()));
            }
            _ => log::debug!("inert statement: {stmt}"),
        }
        Ok(())
    }
}

/// Runs `program` with echo off. Convenience over [`Session`].
pub fn execute(
    program: &[Line],
    registry: &mut ChannelRegistry,
    variables: &mut VariableTable,
    out: &mut dyn Write,
) -> Result<(), ScriptError> {
    Session::new(registry, variables, out).run(program)
}
