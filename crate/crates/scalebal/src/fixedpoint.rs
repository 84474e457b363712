//! Deterministic signed fixed-point arithmetic in `(b1, b2)` format.
//!
//! A `(b1, b2)` number is `sign * sum a_i 2^i` for `i in [-b2, b1-1]`, i.e. an
//! integer multiple of `2^-b2` with magnitude at most `2^b1 - 2^-b2`. The
//! transcendental kernels (`exp_fp`, `ln_fp`, `arcsin_sqrt_fp`, `sin_sq_fp`)
//! guarantee an additive error of at most one unit in the last place of the
//! requested output format. They run on scaled big integers with the output
//! precision plus guard bits, so results are bit-identical across platforms.
//!
//! Rounding to a coarser grid is always to the nearest multiple, with exact
//! halves rounded away from zero.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::hp::Real;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FpError {
    /// The value does not fit in the requested format.
    #[error("value does not fit in ({0}, {1}) fixed-point format")]
    Overflow(u32, u32),
    /// Argument outside the mathematical domain of the kernel.
    #[error("argument outside kernel domain")]
    DomainError,
    /// Structurally malformed input (mismatched or unusable formats).
    #[error("malformed fixed-point input")]
    FormatError,
}

/// A `(b1, b2)` format: `leading` integer bits and `trailing` fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpFormat {
    pub leading: u32,
    pub trailing: u32,
}

impl FpFormat {
    pub const fn new(leading: u32, trailing: u32) -> Self {
        FpFormat { leading, trailing }
    }

    /// Number of representable magnitude steps minus one: `2^(b1+b2) - 1`.
    fn max_mag(&self) -> BigUint {
        (BigUint::one() << (self.leading + self.trailing)) - BigUint::one()
    }

    /// Resolution `2^-b2` as an exact rational.
    pub fn ulp(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::one() << self.trailing)
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.leading, self.trailing)
    }
}

/// Signed fixed-point number. Zero is canonically non-negative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPoint {
    neg: bool,
    mag: BigUint,
    fmt: FpFormat,
}

impl FixedPoint {
    pub fn zero(fmt: FpFormat) -> Self {
        FixedPoint { neg: false, mag: BigUint::zero(), fmt }
    }

    /// Construct from a raw magnitude in units of `2^-b2`.
    pub fn from_mag(neg: bool, mag: BigUint, fmt: FpFormat) -> Result<Self, FpError> {
        if mag > fmt.max_mag() {
            return Err(FpError::Overflow(fmt.leading, fmt.trailing));
        }
        let neg = if mag.is_zero() { false } else { neg };
        Ok(FixedPoint { neg, mag, fmt })
    }

    /// Largest representable value of the format.
    pub fn max_value(fmt: FpFormat) -> Self {
        FixedPoint { neg: false, mag: fmt.max_mag(), fmt }
    }

    pub fn format(&self) -> FpFormat {
        self.fmt
    }

    pub fn is_zero(&self) -> bool {
        self.mag.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    /// Magnitude in units of `2^-b2`.
    pub fn magnitude(&self) -> &BigUint {
        &self.mag
    }

    pub fn neg(&self) -> Self {
        if self.mag.is_zero() {
            self.clone()
        } else {
            FixedPoint { neg: !self.neg, mag: self.mag.clone(), fmt: self.fmt }
        }
    }

    /// Exact value as a rational number.
    pub fn to_rational(&self) -> BigRational {
        let n = BigInt::from_biguint(if self.neg { Sign::Minus } else { Sign::Plus }, self.mag.clone());
        BigRational::new(n, BigInt::one() << self.fmt.trailing)
    }

    pub fn to_real(&self) -> Real {
        let m = BigInt::from_biguint(if self.neg { Sign::Minus } else { Sign::Plus }, self.mag.clone());
        Real::from_dyadic(&m, -(self.fmt.trailing as i64))
    }

    pub fn to_f64(&self) -> f64 {
        self.to_real().to_f64()
    }

    pub(crate) fn to_dyadic(&self) -> Dyadic {
        let m = BigInt::from_biguint(if self.neg { Sign::Minus } else { Sign::Plus }, self.mag.clone());
        Dyadic { m, bits: self.fmt.trailing }
    }

    /// Compare by value across formats.
    pub fn cmp_value(&self, other: &FixedPoint) -> Ordering {
        self.to_dyadic().cmp(&other.to_dyadic())
    }
}

impl fmt::Display for FixedPoint {
    /// Textual trace encoding `±<int>.<frac>@(b1,b2)` with binary digits.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b1 = self.fmt.leading as usize;
        let b2 = self.fmt.trailing as usize;
        let total = b1 + b2;
        let mut bits = vec![b'0'; total];
        for i in 0..total {
            if self.mag.bit(i as u64) {
                bits[total - 1 - i] = b'1';
            }
        }
        let int_part = std::str::from_utf8(&bits[..b1]).unwrap();
        let frac_part = std::str::from_utf8(&bits[b1..]).unwrap();
        write!(
            f,
            "{}{}.{}@({},{})",
            if self.neg { '-' } else { '+' },
            int_part,
            frac_part,
            self.fmt.leading,
            self.fmt.trailing
        )
    }
}

impl FromStr for FixedPoint {
    type Err = FpError;

    fn from_str(s: &str) -> Result<Self, FpError> {
        let (body, fmt_part) = s.split_once('@').ok_or(FpError::FormatError)?;
        let fmt_part = fmt_part.strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or(FpError::FormatError)?;
        let (l, t) = fmt_part.split_once(',').ok_or(FpError::FormatError)?;
        let leading: u32 = l.trim().parse().map_err(|_| FpError::FormatError)?;
        let trailing: u32 = t.trim().parse().map_err(|_| FpError::FormatError)?;
        let fmt = FpFormat::new(leading, trailing);
        let mut chars = body.chars();
        let neg = match chars.next().ok_or(FpError::FormatError)? {
            '+' => false,
            '-' => true,
            _ => return Err(FpError::FormatError),
        };
        let rest: String = chars.collect();
        let (int_part, frac_part) = rest.split_once('.').ok_or(FpError::FormatError)?;
        if int_part.len() != leading as usize || frac_part.len() != trailing as usize {
            return Err(FpError::FormatError);
        }
        let mut mag = BigUint::zero();
        for ch in int_part.chars().chain(frac_part.chars()) {
            mag <<= 1u32;
            match ch {
                '1' => mag += 1u32,
                '0' => {}
                _ => return Err(FpError::FormatError),
            }
        }
        FixedPoint::from_mag(neg, mag, fmt)
    }
}

// ---------------------------------------------------------------------------
// Exact dyadic intermediates
// ---------------------------------------------------------------------------

/// Exact dyadic rational `m / 2^bits` used for intermediate arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Dyadic {
    pub m: BigInt,
    pub bits: u32,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { m: BigInt::zero(), bits: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic { m: BigInt::from(v), bits: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.m.is_zero()
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.m.clone(), BigInt::one() << self.bits)
    }

    pub fn to_real(&self) -> Real {
        Real::from_dyadic(&self.m, -(self.bits as i64))
    }

    fn align(&self, bits: u32) -> BigInt {
        debug_assert!(bits >= self.bits);
        &self.m << (bits - self.bits)
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        let bits = self.bits.max(other.bits);
        Dyadic { m: self.align(bits) + other.align(bits), bits }
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        let bits = self.bits.max(other.bits);
        Dyadic { m: self.align(bits) - other.align(bits), bits }
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        Dyadic { m: &self.m * &other.m, bits: self.bits + other.bits }
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic { m: -&self.m, bits: self.bits }
    }

    pub fn cmp(&self, other: &Dyadic) -> Ordering {
        let bits = self.bits.max(other.bits);
        self.align(bits).cmp(&other.align(bits))
    }

    pub fn cmp_int(&self, v: i64) -> Ordering {
        self.cmp(&Dyadic::from_int(v))
    }

    /// Round to `bits` fractional bits, ties away from zero.
    pub fn round_to_bits(&self, bits: u32) -> Dyadic {
        if bits >= self.bits {
            Dyadic { m: self.align(bits), bits }
        } else {
            Dyadic { m: round_shr(&self.m, self.bits - bits), bits }
        }
    }

    /// Encode into a fixed-point format; the value must already be a multiple
    /// of the target resolution or it is rounded to the nearest one.
    pub fn encode(&self, fmt: FpFormat) -> Result<FixedPoint, FpError> {
        let r = self.round_to_bits(fmt.trailing);
        let (sign, mag) = r.m.into_parts();
        FixedPoint::from_mag(sign == Sign::Minus, mag, fmt)
    }

    /// Encode, clamping to the format boundary instead of failing.
    pub fn encode_saturating(&self, fmt: FpFormat) -> FixedPoint {
        match self.encode(fmt) {
            Ok(v) => v,
            Err(_) => {
                let m = FixedPoint::max_value(fmt);
                if self.m.is_negative() {
                    m.neg()
                } else {
                    m
                }
            }
        }
    }
}

/// `n / 2^k` rounded to nearest, ties away from zero.
pub(crate) fn round_shr(n: &BigInt, k: u32) -> BigInt {
    if k == 0 {
        return n.clone();
    }
    let (sign, mag) = n.clone().into_parts();
    let q = &mag >> k;
    let r = mag - (&q << k);
    let half = BigUint::one() << (k - 1);
    let q = if r >= half { q + BigUint::one() } else { q };
    BigInt::from_biguint(sign, q)
}

/// `n / d` rounded to nearest, ties away from zero (`d > 0`).
pub(crate) fn div_round(n: &BigInt, d: &BigInt) -> BigInt {
    debug_assert!(d.is_positive());
    let (q, r) = n.div_rem(d);
    let r2: BigInt = r.abs() * 2;
    if &r2 >= d {
        if n.is_negative() {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

fn floor_div(n: &BigInt, d: &BigInt) -> BigInt {
    n.div_floor(d)
}

/// Truncating helpers for non-negative series terms. Series loops must round
/// downward: round-to-nearest can regenerate a one-ulp term forever when the
/// term ratio approaches one.
fn trunc_shr_pos(n: &BigInt, k: u32) -> BigInt {
    debug_assert!(!n.is_negative());
    n >> k
}

fn trunc_div_pos(n: &BigInt, d: &BigInt) -> BigInt {
    debug_assert!(!n.is_negative() && d.is_positive());
    n / d
}

// ---------------------------------------------------------------------------
// Rational input type
// ---------------------------------------------------------------------------

/// Non-negative rational with 64-bit numerator and denominator, the input
/// number type for matrix entries and target marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    /// Construct in reduced form; `den` must be positive.
    pub fn new(num: u64, den: u64) -> Result<Self, FpError> {
        if den == 0 {
            return Err(FpError::DomainError);
        }
        let g = gcd_u64(num, den).max(1);
        Ok(Rational { num: num / g, den: den / g })
    }

    pub const fn zero() -> Self {
        Rational { num: 0, den: 1 }
    }

    pub const fn one() -> Self {
        Rational { num: 1, den: 1 }
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_big(&self) -> BigRational {
        BigRational::new(BigInt::from(self.num), BigInt::from(self.den))
    }

    pub fn to_real(&self) -> Real {
        Real::from_ratio(self.num, self.den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn checked_mul(&self, other: &Rational) -> Option<Rational> {
        let n = (self.num as u128).checked_mul(other.num as u128)?;
        let d = (self.den as u128).checked_mul(other.den as u128)?;
        let g = gcd_u128(n, d).max(1);
        let (n, d) = (n / g, d / g);
        if n > u64::MAX as u128 || d > u64::MAX as u128 {
            return None;
        }
        Rational::new(n as u64, d as u64).ok()
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> Ordering {
        let lhs = self.num as u128 * other.den as u128;
        let rhs = other.num as u128 * self.den as u128;
        lhs.cmp(&rhs)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Rational {
    type Err = FpError;

    /// Accepts `num/den`, plain integers, and decimal literals like `0.125`.
    fn from_str(s: &str) -> Result<Self, FpError> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num: u64 = n.trim().parse().map_err(|_| FpError::FormatError)?;
            let den: u64 = d.trim().parse().map_err(|_| FpError::FormatError)?;
            return Rational::new(num, den);
        }
        if let Some((int, frac)) = s.split_once('.') {
            if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
                return Err(FpError::FormatError);
            }
            let int_v: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| FpError::FormatError)? };
            let frac_v: u64 = frac.parse().map_err(|_| FpError::FormatError)?;
            let den = 10u64.checked_pow(frac.len() as u32).ok_or(FpError::FormatError)?;
            let num = int_v.checked_mul(den).and_then(|v| v.checked_add(frac_v)).ok_or(FpError::FormatError)?;
            return Rational::new(num, den);
        }
        let num: u64 = s.parse().map_err(|_| FpError::FormatError)?;
        Rational::new(num, 1)
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn gcd_u128(a: u128, b: u128) -> u128 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// ---------------------------------------------------------------------------
// Exact log2 helpers on rationals
// ---------------------------------------------------------------------------

/// Smallest integer `k` such that `num/den <= 2^k`, i.e. `ceil(log2(num/den))`.
/// Requires a positive value.
pub fn ceil_log2_big(num: &BigUint, den: &BigUint) -> i64 {
    assert!(!num.is_zero() && !den.is_zero());
    let mut k = num.bits() as i64 - den.bits() as i64 + 1;
    // 2^k >= num/den  <=>  den << k >= num (for k >= 0), num <= den >> -k otherwise
    let le = |k: i64| -> bool {
        if k >= 0 {
            num <= &(den << k as usize)
        } else {
            &(num << (-k) as usize) <= den
        }
    };
    while !le(k) {
        k += 1;
    }
    while k > i64::MIN && le(k - 1) {
        k -= 1;
    }
    k
}

pub fn ceil_log2_rational(q: &BigRational) -> i64 {
    assert!(q.is_positive());
    ceil_log2_big(q.numer().magnitude(), q.denom().magnitude())
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

/// Round a non-negative rational to the nearest representable value.
///
/// Ties round half away from zero. Fails with `Overflow` when the nearest
/// multiple of `2^-b2` exceeds the format bound.
pub fn encode_rational(q: &Rational, fmt: FpFormat) -> Result<FixedPoint, FpError> {
    encode_big_rational(&q.to_big(), fmt)
}

/// Signed variant of [`encode_rational`] over arbitrary-precision rationals.
pub fn encode_big_rational(q: &BigRational, fmt: FpFormat) -> Result<FixedPoint, FpError> {
    let scaled = q * BigRational::from_integer(BigInt::one() << fmt.trailing);
    let mag2 = scaled.numer().magnitude() * BigUint::from(2u32);
    let rounded = floor_div(
        &BigInt::from(mag2 + scaled.denom().magnitude()),
        &(BigInt::from(scaled.denom().magnitude().clone()) * 2),
    );
    let mag = rounded.magnitude().clone();
    FixedPoint::from_mag(q.is_negative(), mag, fmt)
}

/// Like [`encode_big_rational`] but clamps to the format boundary.
pub fn encode_big_rational_saturating(q: &BigRational, fmt: FpFormat) -> FixedPoint {
    match encode_big_rational(q, fmt) {
        Ok(v) => v,
        Err(_) => {
            let m = FixedPoint::max_value(fmt);
            if q.is_negative() {
                m.neg()
            } else {
                m
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scaled-integer constants
// ---------------------------------------------------------------------------

static CONST_CACHE: OnceLock<Mutex<HashMap<u32, (BigUint, BigUint)>>> = OnceLock::new();

/// `(round(pi * 2^p), round(ln 2 * 2^p))`, each within one unit of the true
/// scaled value.
fn consts_scaled(p: u32) -> (BigUint, BigUint) {
    let cache = CONST_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&p) {
        return v.clone();
    }
    let work = p + 32;
    // Machin: pi = 16 atan(1/5) - 4 atan(1/239)
    let pi_w = atan_inv_scaled(5, work) * 16u32 - atan_inv_scaled(239, work) * 4u32;
    // ln 2 = 2 atanh(1/3)
    let ln2_w = atanh_inv_scaled(3, work) * 2u32;
    let pi = round_shr_uint(&pi_w, 32);
    let ln2 = round_shr_uint(&ln2_w, 32);
    cache.lock().unwrap().insert(p, (pi.clone(), ln2.clone()));
    (pi, ln2)
}

fn round_shr_uint(n: &BigUint, k: u32) -> BigUint {
    let q = n >> k;
    let r = n - (&q << k);
    if r >= (BigUint::one() << (k - 1)) {
        q + BigUint::one()
    } else {
        q
    }
}

/// `atan(1/x) * 2^p`, truncated series with error below a few ulp.
fn atan_inv_scaled(x: u64, p: u32) -> BigUint {
    let x2 = BigUint::from(x) * BigUint::from(x);
    let mut term = (BigUint::one() << p) / BigUint::from(x);
    let mut acc = BigInt::from(term.clone());
    let mut k = 1u64;
    let mut sign_neg = true;
    loop {
        term /= &x2;
        if term.is_zero() {
            break;
        }
        let contrib = BigInt::from(&term / BigUint::from(2 * k + 1));
        if sign_neg {
            acc -= contrib;
        } else {
            acc += contrib;
        }
        sign_neg = !sign_neg;
        k += 1;
    }
    acc.magnitude().clone()
}

/// `atanh(1/x) * 2^p` for integer `x >= 2`.
fn atanh_inv_scaled(x: u64, p: u32) -> BigUint {
    let x2 = BigUint::from(x) * BigUint::from(x);
    let mut term = (BigUint::one() << p) / BigUint::from(x);
    let mut acc = term.clone();
    let mut k = 1u64;
    loop {
        term /= &x2;
        if term.is_zero() {
            break;
        }
        acc += &term / BigUint::from(2 * k + 1);
        k += 1;
    }
    acc
}

// ---------------------------------------------------------------------------
// Transcendental kernels
// ---------------------------------------------------------------------------

const GUARD_BITS: u32 = 8;

/// `e^x` to within `2^-b4` additive error in the requested `(b3, b4)` format.
pub fn exp_fp(x: &FixedPoint, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    let d = x.to_dyadic();
    exp_dyadic(&d, out_fmt)
}

pub(crate) fn exp_dyadic(x: &Dyadic, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    let (b3, b4) = (out_fmt.leading, out_fmt.trailing);
    // Cheap range cuts before any heavy arithmetic. ln2 bounds at 64 bits:
    // 2^64 * ln2 in [LO, LO+1].
    const LN2_LO: u128 = 0xb17217f7d1cf79ab; // floor(2^64 ln 2)
    let bound = |mult: u64, upper: bool| -> Dyadic {
        let v = LN2_LO + if upper { 1 } else { 0 };
        Dyadic { m: BigInt::from(v) * BigInt::from(mult), bits: 64 }
    };
    if x.cmp(&bound(b3 as u64 + 1, true)) == Ordering::Greater {
        return Err(FpError::Overflow(b3, b4));
    }
    if x.cmp(&bound(b4 as u64 + 1, false).neg()) == Ordering::Less {
        // e^x < 2^-(b4+1): rounds to zero within budget.
        return Ok(FixedPoint::zero(out_fmt));
    }

    // |x| <= (b3 + b4 + 2) ln 2 here, so the halving count stays small.
    let abs_bits = int_bit_len(x);
    let s = abs_bits + 1;
    let p = b3 + b4 + 2 * s + 16 + GUARD_BITS;

    let e_abs = exp_abs_scaled(x, s, p);
    let z = if x.m.is_negative() {
        // reciprocal at the same scale
        div_round(&(BigInt::one() << (2 * p)), &e_abs)
    } else {
        e_abs
    };
    Dyadic { m: z, bits: p }.encode(out_fmt)
}

/// Number of bits in the integer part of |x| (0 when |x| < 1).
fn int_bit_len(x: &Dyadic) -> u32 {
    let mag = x.m.magnitude();
    let bits = mag.bits() as i64 - x.bits as i64;
    bits.max(0) as u32
}

/// `e^|x| * 2^p` via `s` argument halvings and a Taylor series.
fn exp_abs_scaled(x: &Dyadic, s: u32, p: u32) -> BigInt {
    // y = |x| / 2^s with |y| <= 1/2, as a p-bit scaled integer
    let total_bits = x.bits + s;
    let y = if total_bits <= p {
        x.m.magnitude().clone() << (p - total_bits)
    } else {
        round_shr(&BigInt::from(x.m.magnitude().clone()), total_bits - p).magnitude().clone()
    };
    let y = BigInt::from(y);
    let one = BigInt::one() << p;

    // Taylor sum of e^y
    let mut term = one.clone();
    let mut acc = one.clone();
    let mut k = 1u64;
    loop {
        term = trunc_shr_pos(&(&term * &y), p);
        term = trunc_div_pos(&term, &BigInt::from(k));
        if term.is_zero() {
            break;
        }
        acc += &term;
        k += 1;
    }

    // Repeated squaring
    let mut z = acc;
    for _ in 0..s {
        z = round_shr(&(&z * &z), p);
    }
    z
}

/// Natural logarithm with additive error at most `2^-b4`; requires `x > 0`.
pub fn ln_fp(x: &FixedPoint, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    if x.is_zero() || x.is_negative() {
        return Err(FpError::DomainError);
    }
    ln_dyadic(&x.to_dyadic(), out_fmt)
}

pub(crate) fn ln_dyadic(x: &Dyadic, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    if !x.m.is_positive() {
        return Err(FpError::DomainError);
    }
    let p = out_fmt.trailing + 48;
    let mag = x.m.magnitude();
    let bitlen = mag.bits() as i64;
    let e = bitlen - 1 - x.bits as i64; // floor(log2 x)

    // m in [1, 2) scaled to p bits
    let m_scaled = if (bitlen - 1) <= p as i64 {
        mag.clone() << (p as i64 - (bitlen - 1)) as u32
    } else {
        round_shr_uint(mag, ((bitlen - 1) - p as i64) as u32)
    };
    let one = BigInt::one() << p;
    let m = BigInt::from(m_scaled);
    // u = (m - 1) / (m + 1) in [0, 1/3]
    let u = div_round(&((&m - &one) << p), &(&m + &one));

    // atanh series: ln m = 2 sum u^(2k+1) / (2k+1)
    let u2 = round_shr(&(&u * &u), p);
    let mut term = u.clone();
    let mut acc = u;
    let mut k = 1u64;
    loop {
        term = trunc_shr_pos(&(&term * &u2), p);
        if term.is_zero() {
            break;
        }
        acc += trunc_div_pos(&term, &BigInt::from(2 * k + 1));
        k += 1;
    }
    let ln_m = acc << 1;

    let (_, ln2) = consts_scaled(p);
    let result = ln_m + BigInt::from(e) * BigInt::from(ln2);
    Dyadic { m: result, bits: p }.encode(out_fmt)
}

/// `arcsin(sqrt(v))` for `v in [0, 1]`, additive error at most `2^-b4`.
pub fn arcsin_sqrt_fp(v: &FixedPoint, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    if v.is_negative() {
        return Err(FpError::DomainError);
    }
    let d = v.to_dyadic();
    if d.cmp_int(1) == Ordering::Greater {
        return Err(FpError::DomainError);
    }
    let p = out_fmt.trailing + 40;
    let z = arcsin_sqrt_scaled(&d, p);
    Dyadic { m: z, bits: p }.encode(out_fmt)
}

/// `arcsin(sqrt(v)) * 2^p` for dyadic `v in [0, 1]`.
fn arcsin_sqrt_scaled(v: &Dyadic, p: u32) -> BigInt {
    let half = Dyadic { m: BigInt::one(), bits: 1 };
    if v.cmp(&half) == Ordering::Greater {
        // arcsin(sqrt(v)) = pi/2 - arcsin(sqrt(1 - v))
        let complement = Dyadic::from_int(1).sub(v);
        let (pi, _) = consts_scaled(p);
        let inner = arcsin_sqrt_scaled(&complement, p);
        return round_shr(&BigInt::from(pi), 1) - inner;
    }
    // w = sqrt(v) <= sqrt(1/2), scaled floor square root
    let shifted = if v.bits > 2 * p {
        v.m.magnitude() >> (v.bits - 2 * p)
    } else {
        v.m.magnitude().clone() << (2 * p - v.bits)
    };
    let w = BigInt::from(num_integer::Roots::sqrt(&shifted));
    let one_p = p;

    // arcsin series with term ratio w^2 (2k+1)^2 / (2(k+1)(2k+3))
    let w2 = round_shr(&(&w * &w), one_p);
    let mut term = w.clone();
    let mut acc = w;
    let mut k = 0u64;
    loop {
        term = trunc_shr_pos(&(&term * &w2), one_p);
        term = trunc_div_pos(
            &(&term * BigInt::from((2 * k + 1) * (2 * k + 1))),
            &BigInt::from(2 * (k + 1) * (2 * k + 3)),
        );
        if term.is_zero() {
            break;
        }
        acc += &term;
        k += 1;
    }
    acc
}

/// Squared sine with additive error at most `2^-b4`.
pub fn sin_sq_fp(theta: &FixedPoint, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    let d = theta.to_dyadic();
    let p = out_fmt.trailing + int_bit_len(&d) + 40;
    let (pi, _) = consts_scaled(p);
    let pi = BigInt::from(pi);
    // reduce modulo pi: sin^2 has period pi
    let t = d.round_to_bits(p).m;
    let q = div_round(&t, &pi);
    let u = t - q * &pi;
    let r = sin_sq_reduced(&u, p);
    Dyadic { m: r, bits: p }.encode(out_fmt)
}

/// `sin^2(pi * frac)` for a dyadic `frac in [0, 1)`, additive error `2^-b4`.
pub(crate) fn sin_sq_pi_frac(frac: &Dyadic, out_fmt: FpFormat) -> Result<FixedPoint, FpError> {
    let p = out_fmt.trailing + 40;
    let half = Dyadic { m: BigInt::one(), bits: 1 };
    // sin^2(pi f) = sin^2(pi (1 - f)); fold into [0, 1/2]
    let f = if frac.cmp(&half) == Ordering::Greater { Dyadic::from_int(1).sub(frac) } else { frac.clone() };
    let (pi, _) = consts_scaled(p);
    let f_scaled = f.round_to_bits(p).m;
    let u = round_shr(&(f_scaled * BigInt::from(pi)), p);
    let r = sin_sq_reduced(&u, p);
    Dyadic { m: r, bits: p }.encode(out_fmt)
}

/// `sin^2(u) * 2^p` for `|u| <= pi/2 + eps` given as a p-bit scaled integer.
fn sin_sq_reduced(u: &BigInt, p: u32) -> BigInt {
    let u2 = round_shr(&(u * u), p);
    let mut term = u.abs();
    let mut acc = term.clone();
    let mut k = 1u64;
    loop {
        term = trunc_shr_pos(&(&term * &u2), p);
        term = trunc_div_pos(&term, &BigInt::from(2 * k * (2 * k + 1)));
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            acc -= &term;
        } else {
            acc += &term;
        }
        k += 1;
    }
    let s2 = round_shr(&(&acc * &acc), p);
    // clamp numeric spill at the endpoints
    let one = BigInt::one() << p;
    if s2 > one {
        one
    } else if s2.is_negative() {
        BigInt::zero()
    } else {
        s2
    }
}
