//! Exact rational values for DoF bookkeeping.
//!
//! Every DoF value in the crate is a `Ratio<u128>`; floats only appear when a
//! value is rendered for CSV output.

use num_rational::Ratio;
use num_traits::Zero;

pub type Rational = Ratio<u128>;

pub fn ratio(numer: u128, denom: u128) -> Rational {
    Rational::new(numer, denom)
}

pub fn int(value: u128) -> Rational {
    Rational::from_integer(value)
}

pub fn to_f64(value: &Rational) -> f64 {
    *value.numer() as f64 / *value.denom() as f64
}

/// `num/den` form, or just `num` for integers.
pub fn exact(value: &Rational) -> String {
    if value.is_integer() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

/// Ceiling of `numer / denom` for a positive `denom`.
pub fn ceil_div(numer: u128, denom: u128) -> u128 {
    numer.div_ceil(denom)
}

/// Renders `x` with `digits` significant digits, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let magnitude = x.abs().log10().floor() as i64 + 1;
    let decimals = (digits as i64 - magnitude).max(0) as usize;
    let mut s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Exact `num/den` followed by its decimal rendering.
pub fn describe(value: &Rational) -> String {
    if value.is_zero() {
        return "0 (0)".into();
    }
    format!("{} ({})", exact(value), sig(to_f64(value), 12))
}
