//! Recursive-descent parser for single-variable rational expressions:
//! integers, one identifier, `+ - * / ^` (or `**`) and parentheses.

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use super::ratio::Ratio;

/// Largest accepted exponent magnitude.
pub const MAX_EXPONENT: i64 = 1000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CasError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("more than one variable: {0} and {1}")]
    MixedVariables(String, String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("exponent must be an integer in -{MAX_EXPONENT}..={MAX_EXPONENT}")]
    BadExponent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Num(BigInt),
    Ident(String),
    Op(u8),
    Pow,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, CasError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = text[start..i].parse().expect("digits");
                out.push((start, Token::Num(n)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Token::Ident(text[start..i].to_string())));
            }
            b'*' if bytes.get(i + 1) == Some(&b'*') => {
                out.push((i, Token::Pow));
                i += 2;
            }
            b'^' => {
                out.push((i, Token::Pow));
                i += 1;
            }
            b'+' | b'-' | b'*' | b'/' | b'(' | b')' => {
                out.push((i, Token::Op(c)));
                i += 1;
            }
            _ => {
                return Err(CasError::Syntax {
                    pos: i,
                    msg: format!("unexpected character {:?}", text[i..].chars().next().unwrap()),
                })
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    var: Option<String>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn syntax<T>(&self, msg: &str) -> Result<T, CasError> {
        Err(CasError::Syntax {
            pos: self.offset(),
            msg: msg.to_string(),
        })
    }

    fn eat_op(&mut self, op: u8) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Ratio, CasError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op(b'+') {
                acc = acc.add(&self.term()?);
            } else if self.eat_op(b'-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Ratio, CasError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op(b'*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat_op(b'/') {
                let rhs = self.unary()?;
                acc = acc.div(&rhs).ok_or(CasError::DivisionByZero)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Ratio, CasError> {
        if self.eat_op(b'-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat_op(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ratio, CasError> {
        let base = self.atom()?;
        if self.peek() != Some(&Token::Pow) {
            return Ok(base);
        }
        self.pos += 1;
        let exp = self.unary()?;
        let exp = exp
            .as_constant()
            .filter(|q| q.is_integer())
            .and_then(|q| i64::try_from(q.to_integer()).ok())
            .filter(|e| e.abs() <= MAX_EXPONENT)
            .ok_or(CasError::BadExponent)?;
        base.pow(exp).ok_or(CasError::DivisionByZero)
    }

    fn atom(&mut self) -> Result<Ratio, CasError> {
        match self.peek().cloned() {
            Some(Token::Num(n)) => {
                self.pos += 1;
                Ok(Ratio::constant(BigRational::from_integer(n)))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match &self.var {
                    Some(v) if *v != name => Err(CasError::MixedVariables(v.clone(), name)),
                    _ => {
                        self.var = Some(name.clone());
                        Ok(Ratio::variable(&name))
                    }
                }
            }
            Some(Token::Op(b'(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat_op(b')') {
                    return self.syntax("expected ')'");
                }
                Ok(inner)
            }
            Some(_) => self.syntax("expected a number, variable or '('"),
            None => self.syntax("unexpected end of expression"),
        }
    }
}

/// Parses `text` into an unreduced [`Ratio`].
pub fn parse_poly_expr(text: &str) -> Result<Ratio, CasError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        var: None,
    };
    if parser.tokens.is_empty() {
        return parser.syntax("empty expression");
    }
    let value = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return parser.syntax("trailing input");
    }
    Ok(value)
}
