//! Numeric scalar abstraction.
//!
//! Every table, prior and metric in the crate is generic over [`Scalar`], so the
//! same code runs in floating point (fast sweeps) or in exact rational
//! arithmetic (ground truth, bit-exact serialization).

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone + Debug + Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `true` when arithmetic is exact (no rounding error).
    const EXACT: bool;

    /// Short tag written into serialized files.
    const NAME: &'static str;

    /// Comparison slack: two values within this distance are considered tied.
    fn tolerance() -> Self;

    /// Smallest pivot magnitude the simplex accepts.
    fn pivot_tolerance() -> Self {
        Self::tolerance()
    }

    fn to_rational(&self) -> BigRational;

    fn from_rational(r: &BigRational) -> Self;

    /// Lossless textual encoding; `decode(encode(x)) == x` bit for bit.
    fn encode(&self) -> String;

    fn decode(s: &str) -> Option<Self>;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("representable count")
    }

    /// Converts between scalar types, exactly whenever the target can represent the value.
    fn cast<U: Scalar>(&self) -> U {
        if Self::EXACT || U::EXACT {
            U::from_rational(&self.to_rational())
        } else {
            U::from_f64_lossy(self.to_f64_lossy())
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

macro_rules! impl_float_scalar {
    ($t:ty, $name:expr, $tol:expr, $piv:expr) => {
        impl Scalar for $t {
            const EXACT: bool = false;
            const NAME: &'static str = $name;

            fn tolerance() -> Self {
                $tol
            }

            fn pivot_tolerance() -> Self {
                $piv
            }

            fn to_rational(&self) -> BigRational {
                BigRational::from_float(*self).expect("finite float")
            }

            fn from_rational(r: &BigRational) -> Self {
                r.to_f64().unwrap_or(f64::NAN) as $t
            }

            fn encode(&self) -> String {
                format!("{}", self)
            }

            fn decode(s: &str) -> Option<Self> {
                s.trim().parse::<$t>().ok().filter(|x| x.is_finite())
            }
        }
    };
}

impl_float_scalar!(f64, "f64", 1e-12, 1e-9);
impl_float_scalar!(f32, "f32", 1e-5, 1e-4);

impl Scalar for BigRational {
    const EXACT: bool = true;
    const NAME: &'static str = "rational";

    fn tolerance() -> Self {
        BigRational::zero()
    }

    fn to_rational(&self) -> BigRational {
        self.clone()
    }

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn encode(&self) -> String {
        self.to_string()
    }

    fn decode(s: &str) -> Option<Self> {
        parse_rational(s)
    }
}

/// Parses `"3"`, `"-1/4"`, `"0.25"` or `"1e-3"` into an exact rational.
///
/// Decimal literals are read as written (`"0.1"` is one tenth, not the
/// nearest binary float).
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if s.contains('/') {
        let r = BigRational::from_str(s).ok()?;
        return Some(r);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits }).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Exact rational for the decimal a float prints as (`0.1_f64` becomes 1/10).
pub fn decimal_rational(x: f64) -> BigRational {
    parse_rational(&format!("{x}")).expect("finite float prints as a decimal")
}

/// A number written either as a JSON number or as an exact string (`"1/3"`).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(untagged)]
pub enum ExactNumber {
    Number(f64),
    Text(String),
}

impl ExactNumber {
    /// Exact value; JSON numbers are read as the decimal they print as.
    pub fn to_rational(&self) -> crate::Result<BigRational> {
        match self {
            ExactNumber::Number(x) if x.is_finite() => Ok(decimal_rational(*x)),
            ExactNumber::Number(x) => Err(crate::Error::config(format!("number {x} is not finite"))),
            ExactNumber::Text(s) => {
                parse_rational(s).ok_or_else(|| crate::Error::config(format!("cannot parse number {s:?}")))
            }
        }
    }
}

/// `num / den` in the requested scalar type.
pub fn frac<T: Scalar>(num: usize, den: usize) -> T {
    T::from_rational(&BigRational::new(BigInt::from(num), BigInt::from(den)))
}

pub fn sum<T: Scalar, I: IntoIterator<Item = T>>(items: I) -> T {
    items.into_iter().fold(T::zero(), |acc, x| acc + x)
}

pub fn one<T: Scalar>() -> T {
    T::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing_is_exact() {
        let tenth = parse_rational("0.1").unwrap();
        assert_eq!(tenth, BigRational::new(1.into(), 10.into()));
        assert_eq!(parse_rational("-1/4").unwrap(), BigRational::new((-1).into(), 4.into()));
        assert_eq!(parse_rational("2.5e-1").unwrap(), BigRational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("3").unwrap(), BigRational::from_integer(3.into()));
        assert_eq!(parse_rational(".5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(parse_rational("abc").is_none());
        assert!(parse_rational("").is_none());
        assert!(parse_rational("1/0").is_none());
    }

    #[test]
    fn float_encoding_round_trips() {
        for x in [0.1_f64, 1.0 / 3.0, 1e-300, -2.5, 123456.789] {
            assert_eq!(f64::decode(&x.encode()).unwrap().to_bits(), x.to_bits());
        }
        let r = BigRational::new(7.into(), 12.into());
        assert_eq!(BigRational::decode(&r.encode()).unwrap(), r);
    }

    #[test]
    fn casts_between_float_and_rational() {
        let r: BigRational = 0.25_f64.cast();
        assert_eq!(r, BigRational::new(1.into(), 4.into()));
        let back: f64 = r.cast();
        assert_eq!(back, 0.25);
        let third: f64 = frac::<BigRational>(1, 3).cast();
        assert!((third - 1.0 / 3.0).abs() < 1e-16);
    }
}
