use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct SyntaxError {
    pub line: usize,
    pub msg: String,
}

/// One parsed script line. Text fields are kept raw; backtick references
/// are resolved when the instruction runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    External { var: Option<String>, command: String },
    /// Format text between the quotes, escapes still unexpanded.
    ToExternal(String),
    FromExternal {
        /// `Some(true)` for `+`, `Some(false)` for `-`.
        echo: Option<bool>,
        target: Option<String>,
        maxlength: Option<String>,
    },
    Prompt(String),
    SetExternal(String),
    RmExternal(Option<String>),
    SetExternalAttr(String),
    System(String),
    Pipe(String),
    Define { name: String, value: String },
    Do { var: String, from: String, to: String, body: Vec<Line> },
    WriteFile { path: String, format: String },
    RemoveFile(String),
    Echo(String),
    /// Anything that is not an instruction or a comment.
    Data(String),
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    /// 1-based source line.
    pub number: usize,
    pub instr: Instruction,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError { line, msg: msg.into() })
}

/// Splits a leading `"..."` off `text`, returning the raw inside (escapes
/// untouched) and the rest after the closing quote.
fn take_quoted(text: &str, line: usize) -> Result<(String, &str), SyntaxError> {
    let body = text
        .strip_prefix('"')
        .ok_or_else(|| SyntaxError { line, msg: "expected '\"'".into() })?;
    let mut escaped = false;
    for (i, c) in body.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' => escaped = true,
            '"' => return Ok((body[..i].to_string(), &body[i + 1..])),
            _ => {}
        }
    }
    err(line, "unterminated string")
}

/// A quoted format string that must be the whole remaining text.
fn only_quoted(text: &str, line: usize, what: &str) -> Result<String, SyntaxError> {
    let (inner, rest) = take_quoted(text.trim(), line)?;
    if !rest.trim().is_empty() {
        return err(line, format!("unexpected text after {what} string: {:?}", rest.trim()));
    }
    Ok(inner)
}

/// `<path>` or a bare word.
fn take_path(text: &str, line: usize) -> Result<(String, &str), SyntaxError> {
    let text = text.trim_start();
    if let Some(body) = text.strip_prefix('<') {
        let end = body.find('>').ok_or_else(|| SyntaxError { line, msg: "missing '>'".into() })?;
        return Ok((body[..end].to_string(), &body[end + 1..]));
    }
    let end = text.find(char::is_whitespace).unwrap_or(text.len());
    if end == 0 {
        return err(line, "missing file name");
    }
    Ok((text[..end].to_string(), &text[end..]))
}

fn nonempty(text: &str, line: usize, what: &str) -> Result<String, SyntaxError> {
    let t = text.trim();
    if t.is_empty() {
        return err(line, format!("{what} expects an argument"));
    }
    Ok(t.to_string())
}

fn parse_fromexternal(rest: &str, line: usize) -> Result<Instruction, SyntaxError> {
    let (echo, rest) = match rest.chars().next() {
        Some('+') => (Some(true), &rest[1..]),
        Some('-') => (Some(false), &rest[1..]),
        Some(c) if !c.is_whitespace() => return err(line, "unknown #fromexternal variant"),
        _ => (None, rest),
    };
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(Instruction::FromExternal { echo, target: None, maxlength: None });
    }
    let (target, after) = take_quoted(rest, line)?;
    if target.is_empty() {
        return err(line, "empty variable name");
    }
    let after = after.trim();
    let after = after.strip_prefix(',').unwrap_or(after).trim();
    let maxlength = (!after.is_empty()).then(|| after.to_string());
    Ok(Instruction::FromExternal { echo, target: Some(target), maxlength })
}

fn parse_do(rest: &str, line: usize) -> Result<(String, String, String), SyntaxError> {
    let (var, bounds) = rest
        .split_once('=')
        .ok_or_else(|| SyntaxError { line, msg: "expected #do var = from,to".into() })?;
    let (from, to) = bounds
        .split_once(',')
        .ok_or_else(|| SyntaxError { line, msg: "expected #do var = from,to".into() })?;
    let var = var.trim();
    if var.is_empty() || var.contains(char::is_whitespace) {
        return err(line, "bad loop variable");
    }
    Ok((var.to_string(), nonempty(from, line, "#do")?, nonempty(to, line, "#do")?))
}

enum Parsed {
    Simple(Instruction),
    Do { var: String, from: String, to: String },
    EndDo,
}

fn parse_line(raw: &str, number: usize) -> Result<Parsed, SyntaxError> {
    let text = raw.trim_start();
    if text.starts_with('*') || text.trim().is_empty() {
        return Ok(Parsed::Simple(Instruction::Comment));
    }
    let Some(body) = text.strip_prefix('#') else {
        return Ok(Parsed::Simple(Instruction::Data(raw.to_string())));
    };
    let word_len = body
        .find(|c: char| !c.is_ascii_alphabetic())
        .unwrap_or(body.len());
    let (word, rest) = body.split_at(word_len);
    let instr = match word {
        "external" => {
            let rest = rest.trim();
            let (var, command) = if rest.starts_with('"') {
                let (v, after) = take_quoted(rest, number)?;
                (Some(v), after)
            } else {
                (None, rest)
            };
            Instruction::External { var, command: nonempty(command, number, "#external")? }
        }
        "toexternal" => Instruction::ToExternal(only_quoted(rest, number, "#toexternal")?),
        "fromexternal" => parse_fromexternal(rest, number)?,
        "prompt" => Instruction::Prompt(rest.trim().to_string()),
        "setexternal" => Instruction::SetExternal(nonempty(rest, number, "#setexternal")?),
        "rmexternal" => {
            let t = rest.trim();
            Instruction::RmExternal((!t.is_empty()).then(|| t.to_string()))
        }
        "setexternalattr" => Instruction::SetExternalAttr(nonempty(rest, number, "#setexternalattr")?),
        "system" => Instruction::System(nonempty(rest, number, "#system")?),
        "pipe" => Instruction::Pipe(nonempty(rest, number, "#pipe")?),
        "define" => {
            let rest = rest.trim();
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let (name, value) = rest.split_at(end);
            if name.is_empty() {
                return err(number, "#define expects a name");
            }
            let value = value.trim();
            let value = if value.starts_with('"') {
                only_quoted(value, number, "#define")?
            } else {
                value.to_string()
            };
            Instruction::Define { name: name.to_string(), value }
        }
        "do" => {
            let (var, from, to) = parse_do(rest, number)?;
            return Ok(Parsed::Do { var, from, to });
        }
        "enddo" => {
            if !rest.trim().is_empty() {
                return err(number, "unexpected text after #enddo");
            }
            return Ok(Parsed::EndDo);
        }
        "write" => {
            let (path, after) = take_path(rest, number)?;
            Instruction::WriteFile { path, format: only_quoted(after, number, "#write")? }
        }
        "remove" => {
            let (path, after) = take_path(rest, number)?;
            if !after.trim().is_empty() {
                return err(number, "unexpected text after #remove path");
            }
            Instruction::RemoveFile(path)
        }
        "echo" => Instruction::Echo(only_quoted(rest, number, "#echo")?),
        other => return err(number, format!("unknown instruction #{other}")),
    };
    Ok(Parsed::Simple(instr))
}

/// Parses a whole script. `#do`/`#enddo` pairs become nested
/// [`Instruction::Do`] nodes.
pub fn parse_script(source: &str) -> Result<Vec<Line>, SyntaxError> {
    // stack of open loops: (header line, var, from, to, enclosing body)
    let mut stack: Vec<(usize, String, String, String, Vec<Line>)> = Vec::new();
    let mut body: Vec<Line> = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let number = i + 1;
        match parse_line(raw, number)? {
            Parsed::Simple(instr) => body.push(Line { number, instr }),
            Parsed::Do { var, from, to } => {
                stack.push((number, var, from, to, std::mem::take(&mut body)));
            }
            Parsed::EndDo => {
                let Some((header, var, from, to, outer)) = stack.pop() else {
                    return err(number, "#enddo without #do");
                };
                let inner = std::mem::replace(&mut body, outer);
                body.push(Line {
                    number: header,
                    instr: Instruction::Do { var, from, to, body: inner },
                });
            }
        }
    }
    if let Some((header, ..)) = stack.last() {
        return err(*header, "#do without #enddo");
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> Instruction {
        let mut lines = parse_script(src).unwrap();
        assert_eq!(lines.len(), 1);
        lines.remove(0).instr
    }

    #[test]
    fn external_forms() {
        assert_eq!(
            one("#external \"n1\" cat -u"),
            Instruction::External { var: Some("n1".into()), command: "cat -u".into() }
        );
        assert_eq!(
            one("  #external `cmd'"),
            Instruction::External { var: None, command: "`cmd'".into() }
        );
    }

    #[test]
    fn toexternal_keeps_escapes_raw() {
        assert_eq!(one(r#"#toexternal "(a+b)^2\n\n""#), Instruction::ToExternal(r"(a+b)^2\n\n".into()));
        assert_eq!(one(r#"#toexternal "say \"hi\"""#), Instruction::ToExternal(r#"say \"hi\""#.into()));
    }

    #[test]
    fn fromexternal_variants() {
        assert_eq!(
            one("#fromexternal \"tmp\" 1"),
            Instruction::FromExternal { echo: None, target: Some("tmp".into()), maxlength: Some("1".into()) }
        );
        assert_eq!(
            one("#fromexternal+ \"$x\",20"),
            Instruction::FromExternal { echo: Some(true), target: Some("$x".into()), maxlength: Some("20".into()) }
        );
        assert_eq!(
            one("#fromexternal-"),
            Instruction::FromExternal { echo: Some(false), target: None, maxlength: None }
        );
        assert_eq!(
            one("#fromexternal"),
            Instruction::FromExternal { echo: None, target: None, maxlength: None }
        );
        assert!(parse_script("#fromexternal*").is_err());
    }

    #[test]
    fn misc_instructions() {
        assert_eq!(one("#prompt"), Instruction::Prompt(String::new()));
        assert_eq!(one("#prompt READY"), Instruction::Prompt("READY".into()));
        assert_eq!(one("#rmexternal"), Instruction::RmExternal(None));
        assert_eq!(one("#rmexternal `n1'"), Instruction::RmExternal(Some("`n1'".into())));
        assert_eq!(
            one("#define cmd \"./mockcas --prompt P\""),
            Instruction::Define { name: "cmd".into(), value: "./mockcas --prompt P".into() }
        );
        assert_eq!(one("#define cmd . . ."), Instruction::Define { name: "cmd".into(), value: ". . .".into() });
        assert_eq!(
            one("#write <finput> \"`x'\""),
            Instruction::WriteFile { path: "finput".into(), format: "`x'".into() }
        );
        assert_eq!(one("#remove <finput>"), Instruction::RemoveFile("finput".into()));
        assert_eq!(one("* comment"), Instruction::Comment);
        assert_eq!(one("   Local x = 1;"), Instruction::Data("   Local x = 1;".into()));
    }

    #[test]
    fn loops_nest() {
        let prog = parse_script("#do i = 1,2\n#do j=1,`n'\nx\n#enddo\n#enddo\ny").unwrap();
        assert_eq!(prog.len(), 2);
        let Instruction::Do { var, from, to, body } = &prog[0].instr else { panic!() };
        assert_eq!((var.as_str(), from.as_str(), to.as_str()), ("i", "1", "2"));
        let Instruction::Do { var, to, body: inner, .. } = &body[0].instr else { panic!() };
        assert_eq!((var.as_str(), to.as_str()), ("j", "`n'"));
        assert_eq!(inner[0], Line { number: 3, instr: Instruction::Data("x".into()) });
        assert_eq!(prog[1].number, 6);
    }

    #[test]
    fn syntax_errors_carry_line() {
        assert_eq!(parse_script("x\n#enddo").unwrap_err().line, 2);
        assert_eq!(parse_script("\n\n#do i=1,3\n").unwrap_err().line, 3);
        assert_eq!(parse_script("#bogus").unwrap_err().line, 1);
        assert_eq!(parse_script("ok\n#toexternal \"open").unwrap_err().line, 2);
        assert_eq!(parse_script("#toexternal \"a\" junk").unwrap_err().line, 1);
        assert_eq!(parse_script("#external").unwrap_err().line, 1);
    }
}
