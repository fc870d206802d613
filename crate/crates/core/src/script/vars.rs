use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpolationError {
    #[error("undefined variable `{0}'")]
    Undefined(String),
    #[error("unterminated variable reference in {0:?}")]
    Unterminated(String),
}

/// Name to text bindings. `$name` and `name` are distinct entries in the
/// same table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariableTable {
    vars: BTreeMap<String, String>,
}

impl VariableTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.vars.get(name).map(String::as_str)
    }

    pub fn set(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.vars.insert(name.into(), value.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Replaces each `` `name' `` in `text` by the variable's value.
    pub fn interpolate(&self, text: &str) -> Result<String, InterpolationError> {
        let mut out = String::with_capacity(text.len());
        let mut rest = text;
        while let Some(open) = rest.find('`') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            let close = after
                .find('\'')
                .ok_or_else(|| InterpolationError::Unterminated(text.to_string()))?;
            let name = &after[..close];
            let value = self
                .get(name)
                .ok_or_else(|| InterpolationError::Undefined(name.to_string()))?;
            out.push_str(value);
            rest = &after[close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Expands `\n`, `\t`, `\\` and `\"`; any other backslash pair is kept.
pub fn expand_escapes(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('\\') => out.push('\\'),
            Some('"') => out.push('"'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let mut v = VariableTable::new();
        v.set("n1", "1");
        v.set("$EXP", "(d+1)");
        assert_eq!(v.interpolate("#setexternal `n1'").unwrap(), "#setexternal 1");
        assert_eq!(v.interpolate("echo \"`$EXP'\" x`n1'`n1'").unwrap(), "echo \"(d+1)\" x11");
        assert_eq!(v.interpolate("no refs, it's fine").unwrap(), "no refs, it's fine");
        assert_eq!(v.interpolate("`nope'"), Err(InterpolationError::Undefined("nope".into())));
        assert!(matches!(v.interpolate("`n1"), Err(InterpolationError::Unterminated(_))));
    }

    #[test]
    fn escapes() {
        assert_eq!(expand_escapes(r"(a+b)^2\n\n"), "(a+b)^2\n\n");
        assert_eq!(expand_escapes(r#"\t\\\"\q\"#), "\t\\\"\\q\\");
    }
}
