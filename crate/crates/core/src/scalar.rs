//! Dual-mode arithmetic: the tree operations are generic over a scalar that
//! is either `f64` (sweeps, oracles) or an exact big rational (equality-case
//! identities). Rational mode supports integer exponents only.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

/// Exact rational scalar used by the equality-case tests.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + PartialOrd
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_int(n: i64) -> Self;
    /// num/den as a scalar; den must be positive.
    fn ratio(num: i64, den: i64) -> Self;
    fn powu(&self, e: u32) -> Self;
    fn to_f64(&self) -> f64;
    fn is_zero(&self) -> bool;
    /// Finite and representable; rationals always are.
    fn is_valid(&self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
    fn ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn powu(&self, e: u32) -> Self {
        self.powi(e as i32)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_valid(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Rational {
    fn zero() -> Self {
        <Rational as Zero>::zero()
    }
    fn one() -> Self {
        <Rational as One>::one()
    }
    fn from_int(n: i64) -> Self {
        Rational::from_integer(BigInt::from(n))
    }
    fn ratio(num: i64, den: i64) -> Self {
        assert!(den > 0, "denominator must be positive");
        Rational::new(BigInt::from(num), BigInt::from(den))
    }
    fn powu(&self, e: u32) -> Self {
        self.pow(e as i32)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_valid(&self) -> bool {
        true
    }
}

/// Exact n-th root of a nonnegative rational, if one exists.
pub fn nth_root_exact(x: &Rational, n: u32) -> Option<Rational> {
    if x.is_negative() || n == 0 {
        return None;
    }
    if Zero::is_zero(x) {
        return Some(Scalar::zero());
    }
    let root = |v: &BigInt| -> Option<BigInt> {
        let r = num::integer::Roots::nth_root(v, n);
        if num::pow::pow(r.clone(), n as usize) == *v {
            Some(r)
        } else {
            None
        }
    };
    let num = root(x.numer())?;
    let den = root(x.denom())?;
    Some(Rational::new(num, den))
}
