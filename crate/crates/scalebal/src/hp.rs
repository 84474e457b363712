//! High-precision real arithmetic used by the exact evaluators and test oracles.
//!
//! All diagnostics and reference computations run through [`Real`], a thin
//! wrapper around `astro_float::BigFloat` pinned at 192 bits of mantissa.
//! This is deliberately a separate numeric path from the `(b1, b2)` fixed-point
//! pipeline in [`crate::fixedpoint`]: the solvers are the subject under test,
//! this module is the measuring stick.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, RoundingMode};
use num_bigint::{BigInt, BigUint, Sign as IntSign};
use num_rational::BigRational;
use num_traits::Zero;

/// Working mantissa precision in bits.
pub const PRECISION: usize = 192;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// A 192-bit real number with value semantics.
#[derive(Clone, Debug)]
pub struct Real(BigFloat);

impl Real {
    pub fn zero() -> Self {
        Real(BigFloat::from_u64(0, PRECISION))
    }

    pub fn one() -> Self {
        Real(BigFloat::from_u64(1, PRECISION))
    }

    pub fn from_u64(v: u64) -> Self {
        Real(BigFloat::from_u64(v, PRECISION))
    }

    pub fn from_i64(v: i64) -> Self {
        Real(BigFloat::from_i64(v, PRECISION))
    }

    pub fn from_f64(v: f64) -> Self {
        Real(BigFloat::from_f64(v, PRECISION))
    }

    /// Exact conversion of an unsigned big integer (rounded only if it exceeds
    /// the working precision, which no caller in this crate does).
    pub fn from_biguint(v: &BigUint) -> Self {
        let mut acc = BigFloat::from_u64(0, PRECISION);
        let shift = BigFloat::from_u64(1u64 << 32, PRECISION);
        // Consume 32-bit chunks from most significant to least.
        let digits = v.to_u32_digits();
        for &d in digits.iter().rev() {
            acc = acc.mul(&shift, PRECISION, RM);
            acc = acc.add(&BigFloat::from_u64(d as u64, PRECISION), PRECISION, RM);
        }
        Real(acc)
    }

    pub fn from_bigint(v: &BigInt) -> Self {
        let r = Self::from_biguint(v.magnitude());
        if v.sign() == IntSign::Minus {
            -&r
        } else {
            r
        }
    }

    /// `mantissa * 2^exp2`, exactly.
    pub fn from_dyadic(mantissa: &BigInt, exp2: i64) -> Self {
        Self::from_bigint(mantissa).mul_pow2(exp2)
    }

    pub fn from_ratio(num: u64, den: u64) -> Self {
        Self::from_u64(num) / &Self::from_u64(den)
    }

    pub fn from_big_rational(q: &BigRational) -> Self {
        Self::from_bigint(q.numer()) / &Self::from_bigint(q.denom())
    }

    /// Multiply by a power of two via exponent adjustment (exact).
    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.0.is_zero() {
            return self.clone();
        }
        let mut v = self.0.clone();
        let e = v.exponent().expect("finite");
        v.set_exponent(e + k as i32);
        Real(v)
    }

    pub fn pi() -> Self {
        Real(with_consts(|cc| cc.pi(PRECISION, RM)))
    }

    pub fn exp(&self) -> Self {
        Real(with_consts(|cc| self.0.exp(PRECISION, RM, cc)))
    }

    /// Natural logarithm; negative infinity for zero input.
    pub fn ln(&self) -> Self {
        Real(with_consts(|cc| self.0.ln(PRECISION, RM, cc)))
    }

    pub fn sqrt(&self) -> Self {
        Real(self.0.sqrt(PRECISION, RM))
    }

    pub fn sin(&self) -> Self {
        Real(with_consts(|cc| self.0.sin(PRECISION, RM, cc)))
    }

    pub fn asin(&self) -> Self {
        Real(with_consts(|cc| self.0.asin(PRECISION, RM, cc)))
    }

    pub fn abs(&self) -> Self {
        Real(self.0.abs())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative() && !self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !self.0.is_inf() && !self.0.is_nan()
    }

    pub fn neg_infinity() -> Self {
        let mut v = BigFloat::from_u64(0, PRECISION);
        v = v.sub(&BigFloat::max_value(PRECISION), PRECISION, RM);
        // Build a proper -inf by dividing a negative number by zero.
        let inf = v.div(&BigFloat::from_u64(0, PRECISION), PRECISION, RM);
        Real(inf)
    }

    pub fn max(&self, other: &Real) -> Real {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Real) -> Real {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Greatest integer less than or equal to the value.
    pub fn floor_bigint(&self) -> BigInt {
        let fl = self.0.floor();
        bigfloat_to_bigint(&fl)
    }

    pub fn ceil_bigint(&self) -> BigInt {
        let cl = self.0.ceil();
        bigfloat_to_bigint(&cl)
    }

    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let words: Vec<u64> = self.0.mantissa_digits().map(|d| d.to_vec()).unwrap_or_default();
        let e = self.0.exponent().unwrap_or(0);
        // value = 0.m * 2^e, words little-endian
        let top = *words.last().unwrap_or(&0);
        let next = if words.len() >= 2 { words[words.len() - 2] } else { 0 };
        let frac = (top as f64) / 2f64.powi(64) + (next as f64) / 2f64.powi(128);
        let v = frac * 2f64.powi(e);
        if self.0.is_negative() {
            -v
        } else {
            v
        }
    }
}

fn bigfloat_to_bigint(v: &BigFloat) -> BigInt {
    if v.is_zero() {
        return BigInt::zero();
    }
    let words: Vec<u64> = v.mantissa_digits().map(|d| d.to_vec()).unwrap_or_default();
    let e = v.exponent().unwrap_or(0) as i64;
    let nbits = 64 * words.len() as i64;
    // value = int(words) * 2^(e - nbits)
    let mut mag = BigUint::zero();
    for &w in words.iter().rev() {
        mag = (mag << 64) + BigUint::from(w);
    }
    let shift = e - nbits;
    let mag = if shift >= 0 {
        mag << shift as usize
    } else {
        mag >> (-shift) as usize
    };
    let i = BigInt::from(mag);
    if v.is_negative() {
        -i
    } else {
        i
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $imp:expr) => {
        impl std::ops::$trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let f: fn(&BigFloat, &BigFloat) -> BigFloat = $imp;
                Real(f(&self.0, &rhs.0))
            }
        }
        impl std::ops::$trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                std::ops::$trait::$method(&self, rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.add(b, PRECISION, RM));
binop!(Sub, sub, |a, b| a.sub(b, PRECISION, RM));
binop!(Mul, mul, |a, b| a.mul(b, PRECISION, RM));
binop!(Div, div, |a, b| a.div(b, PRECISION, RM));

impl std::ops::Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(self.0.clone().neg())
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.0.partial_cmp(&other.0) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sum of a slice of reals.
pub fn sum(values: &[Real]) -> Real {
    let mut acc = Real::zero();
    for v in values {
        acc = acc + v;
    }
    acc
}
