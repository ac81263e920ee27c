//! Exact rational scalars and encoding-length accounting.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use dashu_base::{Abs, BitTest, Sign};
use dashu_ratio::RBig;

pub use dashu_int::{IBig, UBig};

/// Reduced fraction with the sign carried by the numerator.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rational(RBig);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("malformed rational literal {0:?}")]
    Malformed(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

impl Rational {
    pub fn zero() -> Self {
        Rational(RBig::ZERO)
    }

    pub fn one() -> Self {
        Rational(RBig::ONE)
    }

    /// Panics if `den` is zero.
    pub fn new(num: impl Into<IBig>, den: impl Into<IBig>) -> Self {
        let den = den.into();
        assert!(den != IBig::ZERO, "zero denominator");
        Rational(RBig::from_parts_signed(num.into(), den))
    }

    pub fn from_parts(num: IBig, den: UBig) -> Self {
        assert!(den != UBig::ZERO, "zero denominator");
        Rational(RBig::from_parts(num, den))
    }

    pub fn from_int(v: impl Into<IBig>) -> Self {
        Rational(RBig::from(v.into()))
    }

    pub fn from_ubig(v: UBig) -> Self {
        Rational(RBig::from(v))
    }

    pub fn numer(&self) -> &IBig {
        self.0.numerator()
    }

    pub fn denom(&self) -> &UBig {
        self.0.denominator()
    }

    pub fn into_parts(self) -> (IBig, UBig) {
        self.0.into_parts()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.numer() < &IBig::ZERO
    }

    pub fn is_positive(&self) -> bool {
        self.numer() > &IBig::ZERO
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_int()
    }

    pub fn floor(&self) -> IBig {
        self.0.floor()
    }

    pub fn ceil(&self) -> IBig {
        self.0.ceil()
    }

    pub fn abs(&self) -> Rational {
        Rational(self.0.clone().abs())
    }

    pub fn recip(&self) -> Rational {
        assert!(!self.is_zero(), "reciprocal of zero");
        let (p, q) = self.0.clone().into_parts();
        let (sign, mag) = p.into_parts();
        let num = match sign {
            Sign::Positive => IBig::from(q),
            Sign::Negative => -IBig::from(q),
        };
        Rational(RBig::from_parts(num, mag))
    }

    pub fn pow(&self, exp: usize) -> Rational {
        Rational(RBig::from_parts(self.numer().pow(exp), self.denom().pow(exp)))
    }

    /// Nonnegative integer value, if this is one.
    pub fn to_ubig(&self) -> Option<UBig> {
        if self.is_integer() && !self.is_negative() {
            UBig::try_from(self.numer().clone()).ok()
        } else {
            None
        }
    }

    /// Lossy, for diagnostics only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    pub fn min(self, other: Rational) -> Rational {
        if other < self { other } else { self }
    }

    pub fn max(self, other: Rational) -> Rational {
        if other > self { other } else { self }
    }
}

/// Bits needed for `p/q`: ceil(log2(|p|+1)) + ceil(log2(q+1)).
pub fn encoding_length(x: &Rational) -> u64 {
    // ceil(log2(m+1)) is the bit length of m
    let p = x.numer().clone().abs();
    let p = UBig::try_from(p).expect("abs is nonnegative");
    (p.bit_len() + x.denom().bit_len()) as u64
}

/// 1 / 2^(2L): the smallest distance between distinct rationals of encoding length <= L.
pub fn min_gap(l: u64) -> Rational {
    Rational::from_parts(IBig::ONE, UBig::ONE << (2 * l as usize))
}

/// ceil(log2(m)) for m >= 1.
pub fn ceil_log2(m: &UBig) -> usize {
    assert!(m > &UBig::ZERO);
    (m - UBig::ONE).bit_len()
}

/// Floor of the square root.
pub fn isqrt(m: &UBig) -> UBig {
    use dashu_base::SquareRoot;
    m.sqrt()
}

/// Smallest integer r with r*r >= m.
pub fn isqrt_ceil(m: &UBig) -> UBig {
    let r = isqrt(m);
    if &(&r * &r) == m { r } else { r + UBig::ONE }
}

pub fn lcm(a: &UBig, b: &UBig) -> UBig {
    use dashu_base::Gcd;
    if a == &UBig::ZERO || b == &UBig::ZERO {
        return UBig::ZERO;
    }
    let g = a.gcd(b);
    a / g * b
}

impl Hash for Rational {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.numer().hash(state);
        self.denom().hash(state);
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_digits(s: &str) -> Option<UBig> {
    if s.is_empty() || !s.bytes().all(|c| c.is_ascii_digit()) {
        return None;
    }
    UBig::from_str_radix(s, 10).ok()
}

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts `p/q` or `p`, with an optional leading `-` and no whitespace.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(ParseRationalError::Empty);
        }
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let malformed = || ParseRationalError::Malformed(s.to_string());
        let (p, q) = match body.split_once('/') {
            Some((p, q)) => (parse_digits(p).ok_or_else(malformed)?, parse_digits(q).ok_or_else(malformed)?),
            None => (parse_digits(body).ok_or_else(malformed)?, UBig::ONE),
        };
        if q == UBig::ZERO {
            return Err(ParseRationalError::ZeroDenominator(s.to_string()));
        }
        let p = IBig::from(p);
        Ok(Rational::from_parts(if neg { -p } else { p }, q))
    }
}

macro_rules! from_prim {
    ($($t:ty),*) => {$(
        impl From<$t> for Rational {
            fn from(v: $t) -> Self {
                Rational::from_int(IBig::from(v))
            }
        }
    )*};
}
from_prim!(i32, i64, u32, u64, usize);

impl From<IBig> for Rational {
    fn from(v: IBig) -> Self {
        Rational::from_int(v)
    }
}

impl From<UBig> for Rational {
    fn from(v: UBig) -> Self {
        Rational::from_ubig(v)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr<&Rational> for &Rational {
            type Output = Rational;
            fn $m(self, rhs: &Rational) -> Rational {
                Rational((&self.0).$m(&rhs.0))
            }
        }
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational(self.0.$m(rhs.0))
            }
        }
        impl $tr<&Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: &Rational) -> Rational {
                Rational(self.0.$m(&rhs.0))
            }
        }
        impl $tr<Rational> for &Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational((&self.0).$m(rhs.0))
            }
        }
        impl $atr<&Rational> for Rational {
            fn $am(&mut self, rhs: &Rational) {
                let lhs = std::mem::take(&mut self.0);
                self.0 = lhs.$m(&rhs.0);
            }
        }
        impl $atr<Rational> for Rational {
            fn $am(&mut self, rhs: Rational) {
                let lhs = std::mem::take(&mut self.0);
                self.0 = lhs.$m(rhs.0);
            }
        }
    };
}
binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);

impl Div<&Rational> for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        assert!(!rhs.is_zero(), "division by zero");
        Rational(&self.0 / &rhs.0)
    }
}

impl Div<Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: Rational) -> Rational {
        &self / &rhs
    }
}

impl Div<&Rational> for Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        &self / rhs
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0.clone())
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::one(), |acc, x| acc * x)
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        *self == Rational::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        Some(self.cmp(&Rational::from(*other)))
    }
}

/// Parse helper for tests and literals; panics on malformed input.
pub fn q(s: &str) -> Rational {
    s.parse().unwrap_or_else(|e| panic!("{e}"))
}
