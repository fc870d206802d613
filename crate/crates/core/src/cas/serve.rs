use std::io::{self, BufRead, Write};
use std::time::Duration;

use super::parse::parse_poly_expr;
use super::poly::TermOrder;
use super::ratio::gcd_contract;

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Line printed after every reply.
    pub prompt: String,
    /// Slept once before the first input is read.
    pub startup_delay: Duration,
    pub order: TermOrder,
}

/// Contracts one input line. A trailing `;` is ignored.
pub fn evaluate_line(line: &str, order: TermOrder) -> String {
    let expr = line.trim();
    let expr = expr.strip_suffix(';').unwrap_or(expr);
    match parse_poly_expr(expr) {
        Ok(r) => gcd_contract(&r).format(order),
        Err(e) => format!("ERROR: {e}"),
    }
}

/// Serves contraction requests, one expression per line, until end of input.
/// Every reply, including an error, is followed by the prompt line.
pub fn mockcas_serve<R: BufRead, W: Write>(
    mut input: R,
    mut output: W,
    opts: &ServeOptions,
) -> io::Result<()> {
    if !opts.startup_delay.is_zero() {
        std::thread::sleep(opts.startup_delay);
    }
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let reply = evaluate_line(&line, opts.order);
        writeln!(output, "{reply}")?;
        writeln!(output, "{}", opts.prompt)?;
        output.flush()?;
    }
}
