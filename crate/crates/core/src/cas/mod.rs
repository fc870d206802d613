//! A small exact computer-algebra core: univariate polynomials over the
//! rationals, rational functions with GCD contraction, an expression parser
//! and the prompt-speaking server loop behind the `mockcas` binary.

mod parse;
mod poly;
mod ratio;
mod serve;

pub use parse::{parse_poly_expr, CasError, MAX_EXPONENT};
pub use poly::{Polynomial, TermOrder};
pub use ratio::{gcd_contract, Ratio};
pub use serve::{evaluate_line, mockcas_serve, ServeOptions};

/// The worked example: `(2d^4+3d^3-22d^2-13d+30)/(d^3-11d+10)`.
pub const WITH_GCD: &str = "(2*d^4+3*d^3-22*d^2-13*d+30)/(d^3-11*d+10)";
