use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A numeric literal: exact rational by default, or a float carrying the
/// number of decimal digits it is displayed with.
#[derive(Clone, Debug)]
pub enum Number {
    Exact(BigRational),
    Float { value: f64, digits: u8 },
}

impl Number {
    pub fn int(n: i64) -> Self {
        Number::Exact(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Number::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn float(value: f64, digits: u8) -> Self {
        Number::Float { value, digits }
    }

    /// Parses an unsigned decimal literal such as `7` or `6.75` into an
    /// exact rational.
    pub fn from_decimal(text: &str) -> Option<Self> {
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) || (text.contains('.') && frac_part.is_empty()) {
            return None;
        }
        let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
        let den = BigInt::from(10u32).pow(frac_part.len() as u32);
        Some(Number::Exact(BigRational::new(digits, den)))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Number::Exact(q) => Some(q),
            Number::Float { .. } => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(q) => rational_to_f64(q),
            Number::Float { value, .. } => *value,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Number::Exact(q) => q.is_negative(),
            Number::Float { value, .. } => *value < 0.0 || (*value == 0.0 && value.is_sign_negative()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(q) => q.is_zero(),
            Number::Float { value, .. } => *value == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Number::Exact(q) => q.is_one(),
            Number::Float { value, .. } => *value == 1.0,
        }
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Number::Exact(q) => q.is_integer(),
            Number::Float { value, .. } => value.fract() == 0.0,
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Number::Exact(q) => Number::Exact(-q.clone()),
            Number::Float { value, digits } => Number::Float { value: -value, digits: *digits },
        }
    }

    /// Linear text for the literal. Exact rationals with a terminating
    /// decimal expansion print as decimals; other rationals print as
    /// `p/q`, which re-parses as a division of two literals.
    pub fn to_linear(&self) -> String {
        match self {
            Number::Exact(q) => exact_to_text(q),
            Number::Float { value, digits } => format!("{:.*}", *digits as usize, value),
        }
    }

    /// True when the literal prints as a single numeral (no `/`).
    pub fn is_decimal_printable(&self) -> bool {
        match self {
            Number::Exact(q) => terminating(q.denom()),
            Number::Float { .. } => true,
        }
    }
}

fn terminating(den: &BigInt) -> bool {
    let mut d = den.clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&d % &two).is_zero() {
        d /= &two;
    }
    while (&d % &five).is_zero() {
        d /= &five;
    }
    d.is_one()
}

fn exact_to_text(q: &BigRational) -> String {
    if q.is_integer() {
        return q.numer().to_string();
    }
    if !terminating(q.denom()) {
        return format!("{}/{}", q.numer(), q.denom());
    }
    let neg = q.is_negative();
    let abs = q.abs();
    let mut scale = 0u32;
    let mut scaled = abs.clone();
    while !scaled.is_integer() {
        scaled *= BigRational::from_integer(BigInt::from(10));
        scale += 1;
    }
    let digits = scaled.to_integer().to_string();
    let width = scale as usize + 1;
    let padded = format!("{digits:0>width$}");
    let (i, f) = padded.split_at(padded.len() - scale as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, i, f)
}

pub(crate) fn rational_to_f64(q: &BigRational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // shrink both parts before converting
            let (n, d) = (q.numer().clone(), q.denom().clone());
            let shift = n.bits().max(d.bits()).saturating_sub(900);
            let n2 = n >> shift;
            let d2 = d >> shift;
            n2.to_f64().unwrap_or(f64::NAN) / d2.to_f64().unwrap_or(f64::NAN)
        }
    }
}

/// Integer square root of an exact non-negative rational, when it exists.
pub fn exact_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let n = q.numer().sqrt();
    let d = q.denom().sqrt();
    if &(&n * &n) == q.numer() && &(&d * &d) == q.denom() {
        Some(BigRational::new(n, d))
    } else {
        None
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => a == b,
            (Number::Float { value: a, digits: da }, Number::Float { value: b, digits: db }) => {
                a.to_bits() == b.to_bits() && da == db
            }
            _ => false,
        }
    }
}

impl Eq for Number {}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Number::Exact(q) => {
                0u8.hash(state);
                q.hash(state);
            }
            Number::Float { value, digits } => {
                1u8.hash(state);
                value.to_bits().hash(state);
                digits.hash(state);
            }
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_linear())
    }
}

impl From<i64> for Number {
    fn from(n: i64) -> Self {
        Number::int(n)
    }
}

impl From<BigRational> for Number {
    fn from(q: BigRational) -> Self {
        Number::Exact(q)
    }
}
