//! Finite-precision kernels for relative quantities of the form `a * e^y`.
//!
//! Working with `ln(r / sum_j a_j e^{y_j})` directly is impossible at scale:
//! the exponents grow with the iteration count, so `e^{y_j}` cannot be
//! computed to sufficient absolute precision. The way out is to compute
//! *relative* entries `a_1 e^{y_1} / (a_2 e^{y_2})` against a pivot, which
//! stay bounded. `relative_entry_additive_approx` does exactly that with a
//! rigorously bounded additive error, and `greater_or_equal` builds an
//! approximate comparator on top of it.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::One;

use crate::fixedpoint::{div_round, exp_dyadic, Dyadic, FixedPoint, FpError, FpFormat};

/// `min{ (a1/a2) e^{y1 - y2}, 2^d - 2^-c }` to within `2^-c`, in `(d, c)` format.
///
/// `a1`, `a2` must share a `(0, b)` format; `y1`, `y2` must share a trailing
/// bit count. The convention `a1/a2 = infinity` applies when `a2 = 0`.
/// Intermediates are carried in the widened formats `(2(b+d), b+c+3)`,
/// `(b, 2(b+d)+c+3)` and `(3b+2d, 3b+2d+2c+6)`; the final product is exact and
/// only the last rounding step can lose precision.
pub fn relative_entry_additive_approx(
    a1: &FixedPoint,
    a2: &FixedPoint,
    y1: &FixedPoint,
    y2: &FixedPoint,
    c: u32,
    d: u32,
) -> Result<FixedPoint, FpError> {
    let out_fmt = FpFormat::new(d, c);
    if c < 1 || d < 1 {
        return Err(FpError::FormatError);
    }
    if a1.format() != a2.format() || a1.format().leading != 0 {
        return Err(FpError::FormatError);
    }
    if a1.is_negative() || a2.is_negative() {
        return Err(FpError::FormatError);
    }
    if y1.format().trailing != y2.format().trailing {
        return Err(FpError::FormatError);
    }
    let b = a1.format().trailing;

    let cap = cap_value(c, d);
    if a2.is_zero() {
        return cap.encode(out_fmt);
    }
    if a1.is_zero() {
        return Ok(FixedPoint::zero(out_fmt));
    }

    let delta = y1.to_dyadic().sub(&y2.to_dyadic());
    if delta.cmp_int((b + d) as i64) == Ordering::Greater {
        return cap.encode(out_fmt);
    }
    if delta.cmp_int(-((b + c) as i64)) == Ordering::Less {
        return Ok(FixedPoint::zero(out_fmt));
    }

    // alpha ~ e^delta in (2(b+d), b+c+3)
    let alpha = exp_dyadic(&delta, FpFormat::new(2 * (b + d), b + c + 3))?;
    // beta ~ a1/a2 in (b, 2(b+d)+c+3), exact division rounded once
    let beta_bits = 2 * (b + d) + c + 3;
    let beta_m = div_round(
        &(BigInt::from(a1.magnitude().clone()) << beta_bits),
        &BigInt::from(a2.magnitude().clone()),
    );
    let beta = Dyadic { m: beta_m, bits: beta_bits };
    // gamma' = alpha * beta, exact in (3b+2d, 3b+2d+2c+6)
    let gamma_prime = alpha.to_dyadic().mul(&beta);
    let clipped = if gamma_prime.cmp(&cap) == Ordering::Greater { cap } else { gamma_prime };
    clipped.encode(out_fmt)
}

fn cap_value(c: u32, d: u32) -> Dyadic {
    Dyadic { m: (BigInt::one() << (c + d)) - 1, bits: c }
}

/// Approximate test for `e^{y1 - y2} a1 / a2 >= 1`.
///
/// Guaranteed `true` when the ratio is at least `1 + 2^-c` or the operand
/// pairs are equal, guaranteed `false` when the ratio is at most `1 - 2^-c`;
/// either answer is acceptable in between.
pub fn greater_or_equal(
    a1: &FixedPoint,
    a2: &FixedPoint,
    y1: &FixedPoint,
    y2: &FixedPoint,
    c: u32,
) -> Result<bool, FpError> {
    if a1.cmp_value(a2) == Ordering::Equal && y1.cmp_value(y2) == Ordering::Equal {
        return Ok(true);
    }
    let gamma = relative_entry_additive_approx(a1, a2, y1, y2, c, 1)?;
    Ok(gamma.to_dyadic().cmp_int(1) != Ordering::Less)
}

/// Index of an approximately maximal `a_j e^{y_j}`.
///
/// Scans with [`greater_or_equal`] at `c = 1` until no strict improvement is
/// found. On return, `e^{y_j - y_{j*}} a_j / a_{j*} <= 3/2` holds for every
/// `j`: a non-replacement certifies the ratio is below `3/2`, and a reverse
/// comparison returning `true` certifies it is at most `4/3`. Ties keep the
/// lowest index.
pub fn approx_argmax(a: &[FixedPoint], y: &[FixedPoint]) -> Result<usize, FpError> {
    assert_eq!(a.len(), y.len());
    assert!(!a.is_empty());
    let strictly_better = |j: usize, best: usize| -> Result<bool, FpError> {
        Ok(greater_or_equal(&a[j], &a[best], &y[j], &y[best], 1)?
            && !greater_or_equal(&a[best], &a[j], &y[best], &y[j], 1)?)
    };
    let mut best = 0usize;
    loop {
        let mut improved = false;
        for j in 0..a.len() {
            if j != best && strictly_better(j, best)? {
                best = j;
                improved = true;
            }
        }
        if !improved {
            return Ok(best);
        }
    }
}
