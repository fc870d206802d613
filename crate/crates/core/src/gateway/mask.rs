use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::channel::{ChannelError, ChannelRegistry};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unbalanced parentheses after acc( at offset {0}")]
    UnbalancedParens(usize),
    #[error("unknown gateway command {0:?}")]
    UnknownCommand(String),
    #[error("dd({index}) is not stored (store holds {len})")]
    BadIndex { index: usize, len: usize },
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("simplifier: {0}")]
    Simplifier(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Something that turns an expression into its simplified form.
pub trait Simplifier {
    fn simplify(&mut self, expr: &str) -> Result<String, GatewayError>;
}

/// Uses the registry's current channel: sends `expr` plus a newline and
/// reads the reply framed by the channel's prompt.
impl Simplifier for ChannelRegistry {
    fn simplify(&mut self, expr: &str) -> Result<String, GatewayError> {
        self.send(format!("{expr}\n").as_bytes())?;
        let reply = self.read_until_prompt(None)?;
        let reply = String::from_utf8_lossy(&reply).into_owned();
        if let Some(msg) = reply.strip_prefix("ERROR: ") {
            return Err(GatewayError::Simplifier(msg.to_string()));
        }
        Ok(reply)
    }
}

/// Ordered table of stored expressions; entry `k` (1-based) is `dd(k)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskingStore {
    entries: Vec<String>,
}

impl MaskingStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Stores `expr` and returns its 1-based index.
    pub fn push(&mut self, expr: String) -> usize {
        self.entries.push(expr);
        self.entries.len()
    }

    pub fn get(&self, index: usize) -> Result<&str, GatewayError> {
        index
            .checked_sub(1)
            .and_then(|i| self.entries.get(i))
            .map(String::as_str)
            .ok_or(GatewayError::BadIndex {
                index,
                len: self.entries.len(),
            })
    }

    /// One entry per line, in storage order, LF-terminated.
    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let mut text = String::new();
        for e in &self.entries {
            text.push_str(e);
            text.push('\n');
        }
        fs::write(path, text).map_err(|source| GatewayError::File {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Replaces the store with the lines of `path`.
    pub fn load(&mut self, path: &Path) -> Result<(), GatewayError> {
        let text = fs::read_to_string(path).map_err(|source| GatewayError::File {
            path: path.to_path_buf(),
            source,
        })?;
        self.entries = text.lines().map(str::to_string).collect();
        Ok(())
    }
}

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Finds `name(` at a word boundary, starting at `from`.
fn find_call(line: &str, name: &str, from: usize) -> Option<usize> {
    let pat = format!("{name}(");
    let mut start = from;
    while let Some(off) = line[start..].find(&pat) {
        let at = start + off;
        if at == 0 || !is_ident_byte(line.as_bytes()[at - 1]) {
            return Some(at);
        }
        start = at + 1;
    }
    None
}

/// Index of the `)` that closes the `(` at `open`.
fn matching_paren(line: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, b) in line.bytes().enumerate().skip(open) {
        match b {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// The masking gateway: replaces `acc(...)` by `dd(k)` handles and
/// understands the `@` command lines.
#[derive(Debug, Clone)]
pub struct Gateway {
    pub store: MaskingStore,
    /// `@f1`: pass acc() contents through the simplifier.
    pub filtering: bool,
    /// `@e1`: expand every `dd(k)` back into `(entry k)`.
    pub expanding: bool,
}

impl Default for Gateway {
    fn default() -> Self {
        Gateway {
            store: MaskingStore::new(),
            filtering: true,
            expanding: false,
        }
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces every `acc(<expr>)` with `dd(k)`, storing `<expr>` (simplified
    /// when filtering is on and a simplifier is given) as entry `k`.
    pub fn mask_line(
        &mut self,
        line: &str,
        mut simplifier: Option<&mut dyn Simplifier>,
    ) -> Result<String, GatewayError> {
        // validate first so a bad line leaves the store untouched
        let mut spans = Vec::new();
        let mut from = 0;
        while let Some(at) = find_call(line, "acc", from) {
            let open = at + 3;
            let close = matching_paren(line, open).ok_or(GatewayError::UnbalancedParens(at))?;
            spans.push((at, open, close));
            from = close + 1;
        }
        if spans.is_empty() {
            return Ok(line.to_string());
        }
        let mut simplified = Vec::with_capacity(spans.len());
        for &(_, open, close) in &spans {
            let expr = &line[open + 1..close];
            let stored = match simplifier.as_deref_mut() {
                Some(s) if self.filtering => s.simplify(expr)?,
                _ => expr.to_string(),
            };
            simplified.push(stored);
        }
        let mut out = String::with_capacity(line.len());
        let mut last = 0;
        for (&(at, _, close), stored) in spans.iter().zip(simplified) {
            out.push_str(&line[last..at]);
            let k = self.store.push(stored);
            out.push_str(&format!("dd({k})"));
            last = close + 1;
        }
        out.push_str(&line[last..]);
        Ok(out)
    }

    /// Replaces every `dd(k)` with `(entry k)`.
    pub fn expand_line(&self, line: &str) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(line.len());
        let mut last = 0;
        let mut from = 0;
        while let Some(at) = find_call(line, "dd", from) {
            let open = at + 2;
            let digits = line[open + 1..]
                .bytes()
                .take_while(u8::is_ascii_digit)
                .count();
            let close = open + 1 + digits;
            if digits == 0 || line.as_bytes().get(close) != Some(&b')') {
                from = open;
                continue;
            }
            let index: usize = line[open + 1..close].parse().unwrap_or(usize::MAX);
            let entry = self.store.get(index)?;
            out.push_str(&line[last..at]);
            out.push('(');
            out.push_str(entry);
            out.push(')');
            last = close + 1;
            from = last;
        }
        out.push_str(&line[last..]);
        Ok(out)
    }

    /// Expands `@(k)` references in the text of an `@v` command.
    fn substitute_refs(&self, text: &str) -> Result<String, GatewayError> {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(at) = rest.find("@(") {
            let after = &rest[at + 2..];
            let digits = after.bytes().take_while(u8::is_ascii_digit).count();
            if digits == 0 || after.as_bytes().get(digits) != Some(&b')') {
                out.push_str(&rest[..at + 2]);
                rest = after;
                continue;
            }
            let index: usize = after[..digits].parse().unwrap_or(usize::MAX);
            out.push_str(&rest[..at]);
            out.push_str(self.store.get(index)?);
            rest = &after[digits + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }

    /// Executes one `@` command line and returns the lines it prints.
    pub fn gateway_command(&mut self, line: &str) -> Result<Vec<String>, GatewayError> {
        let body = line
            .strip_prefix('@')
            .ok_or_else(|| GatewayError::UnknownCommand(line.to_string()))?;
        let mut chars = body.chars();
        let letter = chars.next();
        let arg = chars.as_str();
        match (letter, arg) {
            (Some('f'), "0") => self.filtering = false,
            (Some('f'), "1") => self.filtering = true,
            (Some('e'), "0") => self.expanding = false,
            (Some('e'), "1") => self.expanding = true,
            (Some('v'), text) => return Ok(vec![self.substitute_refs(text)?]),
            (Some('s'), name) if !name.trim().is_empty() => self.store.save(Path::new(name.trim()))?,
            (Some('r'), name) if !name.trim().is_empty() => self.store.load(Path::new(name.trim()))?,
            _ => return Err(GatewayError::UnknownCommand(line.to_string())),
        }
        Ok(Vec::new())
    }

    /// Handles one input line of the gateway: `@` commands, otherwise masking
    /// and, in `@e1` mode, expansion.
    pub fn process_line(
        &mut self,
        line: &str,
        simplifier: Option<&mut dyn Simplifier>,
    ) -> Result<Vec<String>, GatewayError> {
        if line.starts_with('@') {
            return self.gateway_command(line);
        }
        let masked = self.mask_line(line, simplifier)?;
        if self.expanding {
            Ok(vec![self.expand_line(&masked)?])
        } else {
            Ok(vec![masked])
        }
    }
}
