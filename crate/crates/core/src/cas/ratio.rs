use num_rational::BigRational;
use num_traits::One;

use super::poly::{Polynomial, TermOrder};

/// Quotient of two polynomials in one variable. Arithmetic does not reduce;
/// call [`gcd_contract`] for the canonical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ratio {
    pub numer: Polynomial,
    pub denom: Polynomial,
    /// Variable name, `None` while the value is a pure number.
    pub var: Option<String>,
}

impl Ratio {
    /// Panics if `denom` is zero.
    pub fn new(numer: Polynomial, denom: Polynomial, var: Option<String>) -> Self {
        assert!(!denom.is_zero(), "zero denominator");
        Ratio { numer, denom, var }
    }

    pub fn constant(c: BigRational) -> Self {
        Ratio::new(Polynomial::constant(c), Polynomial::one(), None)
    }

    pub fn variable(name: &str) -> Self {
        Ratio::new(Polynomial::var(), Polynomial::one(), Some(name.to_string()))
    }

    pub fn is_zero(&self) -> bool {
        self.numer.is_zero()
    }

    /// The value as a number, if it does not depend on the variable.
    pub fn as_constant(&self) -> Option<BigRational> {
        let n = self.numer.as_constant()?;
        let d = self.denom.as_constant()?;
        Some(n / d)
    }

    fn merge_var(&self, other: &Ratio) -> Option<String> {
        self.var.clone().or_else(|| other.var.clone())
    }

    pub fn add(&self, other: &Ratio) -> Ratio {
        if self.denom == other.denom {
            return Ratio::new(&self.numer + &other.numer, self.denom.clone(), self.merge_var(other));
        }
        Ratio::new(
            &(&self.numer * &other.denom) + &(&other.numer * &self.denom),
            &self.denom * &other.denom,
            self.merge_var(other),
        )
    }

    pub fn neg(&self) -> Ratio {
        Ratio::new(-&self.numer, self.denom.clone(), self.var.clone())
    }

    pub fn sub(&self, other: &Ratio) -> Ratio {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Ratio) -> Ratio {
        Ratio::new(
            &self.numer * &other.numer,
            &self.denom * &other.denom,
            self.merge_var(other),
        )
    }

    /// `None` when `other` is zero.
    pub fn div(&self, other: &Ratio) -> Option<Ratio> {
        if other.is_zero() {
            return None;
        }
        Some(Ratio::new(
            &self.numer * &other.denom,
            &self.denom * &other.numer,
            self.merge_var(other),
        ))
    }

    /// `None` for a negative power of zero.
    pub fn pow(&self, exp: i64) -> Option<Ratio> {
        let e = u32::try_from(exp.unsigned_abs()).ok()?;
        let (n, d) = (self.numer.pow(e), self.denom.pow(e));
        if exp >= 0 {
            Some(Ratio::new(n, d, self.var.clone()))
        } else if n.is_zero() {
            None
        } else {
            Some(Ratio::new(d, n, self.var.clone()))
        }
    }

    /// `self` and `other` denote the same rational function:
    /// `self.numer * other.denom == other.numer * self.denom`.
    pub fn same_value(&self, other: &Ratio) -> bool {
        &self.numer * &other.denom == &other.numer * &self.denom
    }

    /// Prints `num` or `(num)/(den)`; see [`Polynomial::format`].
    pub fn format(&self, order: TermOrder) -> String {
        let var = self.var.as_deref().unwrap_or("x");
        let num = self.numer.format(var, order);
        if self.denom.is_one() {
            return num;
        }
        let num = if self.numer.term_count() > 1 {
            format!("({num})")
        } else {
            num
        };
        let den = self.denom.format(var, order);
        let single_monomial = self.denom.term_count() == 1
            && self.denom.leading().is_some_and(One::is_one);
        if single_monomial {
            format!("{num}/{den}")
        } else {
            format!("{num}/({den})")
        }
    }
}

/// Divides numerator and denominator by their GCD and scales so the
/// denominator is monic, giving a canonical representative.
pub fn gcd_contract(r: &Ratio) -> Ratio {
    if r.numer.is_zero() {
        return Ratio::new(Polynomial::zero(), Polynomial::one(), r.var.clone());
    }
    let g = Polynomial::gcd(&r.numer, &r.denom);
    let (numer, rem_n) = r.numer.div_rem(&g);
    let (denom, rem_d) = r.denom.div_rem(&g);
    debug_assert!(rem_n.is_zero() && rem_d.is_zero());
    let lc = denom.leading().expect("nonzero denominator").clone();
    let inv = lc.recip();
    let numer = numer.scale(&inv);
    let denom = denom.scale(&inv);
    debug_assert!(denom.leading().is_some_and(|c| *c == BigRational::one()));
    Ratio::new(numer, denom, r.var.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    fn p(c: &[i64]) -> Polynomial {
        Polynomial::from_ints(c)
    }

    fn r(n: &[i64], d: &[i64]) -> Ratio {
        Ratio::new(p(n), p(d), Some("d".into()))
    }

    #[test]
    fn worked_example_contracts_to_linear() {
        let with_gcd = r(&[30, -13, -22, 3, 2], &[10, -11, 0, 1]);
        let out = gcd_contract(&with_gcd);
        assert_eq!(out, r(&[3, 2], &[1]));
        assert_eq!(out.format(TermOrder::Ascending), "3+2*d");
        assert_eq!(out.format(TermOrder::Descending), "2*d+3");
    }

    #[test]
    fn denominator_made_monic() {
        // 1/(2d+2) -> (1/2)/(d+1)
        let out = gcd_contract(&r(&[1], &[2, 2]));
        assert_eq!(out.denom, p(&[1, 1]));
        assert_eq!(out.format(TermOrder::Ascending), "1/2/(1+d)");
        // (2d+2)/(4d+4) -> 1/2
        assert_eq!(gcd_contract(&r(&[2, 2], &[4, 4])).format(TermOrder::Ascending), "1/2");
    }

    #[test]
    fn zero_numerator() {
        let out = gcd_contract(&r(&[], &[1, 1]));
        assert_eq!(out.format(TermOrder::Ascending), "0");
        assert!(out.denom.is_one());
    }

    #[test]
    fn ratio_printing() {
        assert_eq!(r(&[1, 0, 1], &[-1, 1]).format(TermOrder::Descending), "(d^2+1)/(d-1)");
        assert_eq!(r(&[1, 0, 1], &[-1, 1]).format(TermOrder::Ascending), "(1+d^2)/(-1+d)");
        assert_eq!(r(&[3], &[0, 0, 1]).format(TermOrder::Ascending), "3/d^2");
        assert_eq!(r(&[0, 3], &[0, 0, 1]).format(TermOrder::Ascending), "3*d/d^2");
    }

    #[test]
    fn pow_and_div() {
        let d = Ratio::variable("d");
        let inv = d.pow(-2).unwrap();
        assert_eq!(inv, r(&[1], &[0, 0, 1]));
        let zero = Ratio::constant(BigRational::zero());
        assert!(zero.pow(-1).is_none());
        assert!(d.div(&zero).is_none());
    }
}
