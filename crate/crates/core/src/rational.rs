//! Exact rationals and their conversions.
//!
//! Every finite IEEE-754 value is a dyadic rational `m * 2^e`. The
//! conversions here decompose the bit pattern directly, so no rounding
//! happens anywhere between the weight stored in the model file and the
//! literal written into the formula.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always kept in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

/// Converts a finite `f32` to the rational it denotes, exactly.
pub fn float32_to_rational(f: f32) -> Result<Rational> {
    if !f.is_finite() {
        return Err(Error::NonFiniteWeight(format!("{f}")));
    }
    let bits = f.to_bits();
    let negative = bits >> 31 == 1;
    let biased = ((bits >> 23) & 0xff) as i64;
    let fraction = (bits & 0x7f_ffff) as u64;
    let (mantissa, exponent) = if biased == 0 {
        (fraction, -149)
    } else {
        (fraction | (1 << 23), biased - 150)
    };
    Ok(dyadic(negative, mantissa, exponent))
}

/// Converts a finite `f64` to the rational it denotes, exactly.
/// Denominators go up to `2^1074` for subnormals.
pub fn float64_to_rational(f: f64) -> Result<Rational> {
    if !f.is_finite() {
        return Err(Error::NonFiniteWeight(format!("{f}")));
    }
    let bits = f.to_bits();
    let negative = bits >> 63 == 1;
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let fraction = bits & 0x000f_ffff_ffff_ffff;
    let (mantissa, exponent) = if biased == 0 {
        (fraction, -1074)
    } else {
        (fraction | (1 << 52), biased - 1075)
    };
    Ok(dyadic(negative, mantissa, exponent))
}

/// Builds `±mantissa * 2^exponent` in lowest terms.
fn dyadic(negative: bool, mut mantissa: u64, mut exponent: i64) -> Rational {
    if mantissa == 0 {
        return Rational::zero();
    }
    if exponent < 0 {
        let shift = (mantissa.trailing_zeros() as i64).min(-exponent);
        mantissa >>= shift;
        exponent += shift;
    }
    let sign = if negative { Sign::Minus } else { Sign::Plus };
    let mut numer = BigInt::from_biguint(sign, mantissa.into());
    let mut denom = BigInt::one();
    if exponent >= 0 {
        numer <<= exponent as usize;
    } else {
        denom <<= (-exponent) as usize;
    }
    Rational::new_raw(numer, denom)
}

/// True when the denominator is a power of two.
pub fn is_dyadic(r: &Rational) -> bool {
    let d = r.denom();
    d.is_positive() && (d & (d - BigInt::one())).is_zero()
}

/// Parses `"3"`, `"-3/4"`, `"0.125"`, `"-1.5e-3"` exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (mantissa, exp) = match text.find(['e', 'E']) {
        Some(i) => (&text[..i], text[i + 1..].parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all: String = format!("{int_part}{frac_part}");
    let numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().ok()? };
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        Rational::from_integer(numer * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(numer, num_traits::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// How numerals are spelled in emitted SMT-LIB text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NumeralStyle {
    /// Write negatives as `(/ -n d)` / `-n` instead of `(- (/ n d))`.
    pub fig5_compat: bool,
    /// Spell integers as decimals (`3.0`) so they are Real-sorted in logics
    /// that also contain Int.
    pub real_decimals: bool,
}

/// Renders a rational as an SMT-LIB term.
pub fn smt_literal(value: &Rational, style: NumeralStyle) -> String {
    let numeral = |n: &BigInt| {
        if style.real_decimals {
            format!("{n}.0")
        } else {
            n.to_string()
        }
    };
    let magnitude = value.abs();
    let body = if magnitude.denom().is_one() {
        numeral(magnitude.numer())
    } else {
        format!("(/ {} {})", numeral(magnitude.numer()), numeral(magnitude.denom()))
    };
    if !value.is_negative() {
        return body;
    }
    if style.fig5_compat {
        let n = numeral(value.numer());
        if value.denom().is_one() {
            n
        } else {
            format!("(/ {} {})", n, numeral(value.denom()))
        }
    } else {
        format!("(- {body})")
    }
}

/// Compact human rendering: `7`, `-1/3`.
pub fn display(value: &Rational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Lowest-terms check used by invariants and tests.
pub fn is_normalized(value: &Rational) -> bool {
    value.denom().is_positive() && value.numer().gcd(value.denom()).is_one()
        || value.numer().is_zero() && value.denom().is_one()
}
