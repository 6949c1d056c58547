//! Exact rational scalars and formatting helpers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

pub type Rational = num_rational::BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Rounds to `places` decimals, half away from zero, exactly.
pub fn round_half_away(value: &Rational, places: u32) -> Rational {
    let scale = BigInt::from(10u32).pow(places);
    let scaled = value * Rational::from_integer(scale.clone());
    let twice: BigInt = scaled.numer() * BigInt::from(2);
    let denom2: BigInt = scaled.denom() * BigInt::from(2);
    // floor((2|x| + 1) / 2) on the absolute value
    let magnitude = (twice.abs() + scaled.denom()).div_floor(&denom2);
    let rounded = if scaled.is_negative() { -magnitude } else { magnitude };
    Rational::new(rounded, scale)
}

/// Decimal string with exactly `places` digits after the point.
pub fn format_decimal(value: &Rational, places: u32) -> String {
    let rounded = round_half_away(value, places);
    let scale = BigInt::from(10u32).pow(places);
    let units = (rounded * Rational::from_integer(scale.clone())).to_integer();
    let negative = units.is_negative();
    let digits = units.abs().to_string();
    let places = places as usize;
    let body = if places == 0 {
        digits
    } else {
        let padded = format!("{:0>width$}", digits, width = places + 1);
        let (whole, frac) = padded.split_at(padded.len() - places);
        format!("{whole}.{frac}")
    };
    if negative && !units.is_zero() {
        format!("-{body}")
    } else {
        body
    }
}

/// `17/10`, or `3` for integers.
pub fn format_fraction(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}
