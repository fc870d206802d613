//! The line-oriented command language driven by `extsh`.
//!
//! Lines starting with `*` are comments, lines starting with `#` are
//! instructions, everything else is data: `;`-terminated statements of
//! which only `Local`, `Print`, `Drop` and `$name = ...` do anything.
//! `` `name' `` is replaced by the variable's value when the line runs.
//!
//! ```text
//! #external "n1" cat -u
//! #toexternal "(a+b)^2\n\n"
//! Local x =
//! #fromexternal
//!    ;
//! Print;
//! ```

mod exec;
mod parse;
mod vars;

pub use exec::{execute, ExecError, ScriptError, Session, MAX_SPLICE_DEPTH};
pub use parse::{parse_script, Instruction, Line, SyntaxError};
pub use vars::{expand_escapes, InterpolationError, VariableTable};

#[cfg(test)]
mod tests;
