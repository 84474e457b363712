//! Statistical simulation of amplitude estimation and quantum maximum
//! finding, with faithful query charging.
//!
//! No statevectors are kept anywhere. The amplitude-amplification operator
//! acts as a rotation on a two-dimensional subspace, so its phase-estimation
//! outcome distribution is known in closed form: for an eigenphase `theta`
//! and `t` phase bits, outcome `m` appears with probability
//!
//! ```text
//! Pr[m | theta] = sin^2(pi (w - m)) / (N^2 sin^2(pi (w - m) / N)),
//! ```
//!
//! where `N = 2^t` and `w = theta N / (2 pi)`, the difference taken modulo
//! `N`. The starting state splits evenly between the two conjugate
//! eigenvectors, so the eigenphase is `+phi` or `-phi` with probability 1/2
//! each. We sample this law directly; everything downstream of the sampled
//! `t`-bit outcome goes through the same fixed-point path a circuit would
//! use.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::fixedpoint::{
    arcsin_sqrt_fp, ceil_log2_big, ceil_log2_rational, sin_sq_pi_frac, Dyadic, FixedPoint, FpError,
    FpFormat, Rational,
};
use crate::hp::Real;
use crate::numerics::approx_argmax;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QsimError {
    #[error("precondition violated: {0}")]
    PrecondViolated(&'static str),
    #[error(transparent)]
    Fp(#[from] FpError),
}

/// Phase-estimation schedule: `t` phase bits, an odd number of repetitions
/// whose median is returned, and the oracle queries consumed per controlled
/// application of the amplification operator (two: the state preparation and
/// its inverse).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEstimationConfig {
    pub t: u32,
    pub repetitions: u32,
    pub per_iteration_queries: u64,
}

impl PhaseEstimationConfig {
    /// Schedule for an `n`-dimensional vector (a power of two), relative
    /// accuracy `delta` and failure probability `eta > 0`.
    pub fn derive(n: u64, delta: &Rational, eta: &Rational) -> Result<Self, QsimError> {
        if eta.is_zero() {
            return Err(QsimError::PrecondViolated("eta must be positive"));
        }
        // smallest t with sqrt(n)/delta <= 2^t, compared exactly as
        // n * den^2 <= 4^t * num^2
        let n_b = num_bigint::BigUint::from(n);
        let den2 = num_bigint::BigUint::from(delta.denom()) * delta.denom();
        let num2 = num_bigint::BigUint::from(delta.numer()) * delta.numer();
        let lhs = n_b * den2;
        let mut t = 0u32;
        while (&num2 << (2 * t)) < lhs {
            t += 1;
        }
        let t = t + 8;
        // 2 ceil(9 ln(1/eta)) + 1 repetitions, odd by construction
        let ln_inv_eta = (Real::from_u64(eta.denom()) / &Real::from_u64(eta.numer())).ln();
        let reps_half = (Real::from_u64(9) * &ln_inv_eta).ceil_bigint();
        let reps_half: u32 = reps_half.max(BigInt::from(0)).try_into().unwrap_or(u32::MAX / 2);
        let repetitions = 2 * reps_half + 1;
        Ok(PhaseEstimationConfig { t, repetitions, per_iteration_queries: 2 })
    }

    pub fn charged_queries(&self) -> u64 {
        self.repetitions as u64 * (1u64 << self.t) * self.per_iteration_queries
    }
}

/// Result of a simulated amplitude-estimation sum.
#[derive(Debug, Clone)]
pub struct QasResult {
    /// Median estimate in `(ceil(log2 n) + 1, b)` format.
    pub value: FixedPoint,
    /// Oracle queries charged: `repetitions * 2^t * per_iteration_queries`.
    pub charged_queries: u64,
    /// Whether the estimate landed within the promised multiplicative bounds
    /// of the true sum (bookkeeping; unobservable on real hardware).
    pub within_bounds: bool,
}

/// Multiplicative `(1 +/- delta)` estimate of `sum_j v_j`.
///
/// Requires `v_j in [0, 3/4]` in a shared `(0, b')` format with at least one
/// entry `>= 1/4`, `delta in (0, 1/2]`, `b >= ceil(log2(1/delta)) + 6` and
/// `eta > 0`. With probability at least `1 - eta` the returned value is a
/// `(1 +/- delta)`-multiplicative approximation of the true sum.
pub fn quantum_approximate_sum(
    values: &[FixedPoint],
    b: u32,
    delta: &Rational,
    eta: &Rational,
    seed: u64,
) -> Result<QasResult, QsimError> {
    if values.is_empty() {
        return Err(QsimError::PrecondViolated("empty vector"));
    }
    if delta.is_zero() || delta > &Rational::new(1, 2).unwrap() {
        return Err(QsimError::PrecondViolated("delta outside (0, 1/2]"));
    }
    if eta.is_zero() {
        return Err(QsimError::PrecondViolated("eta must be positive"));
    }
    let inv_delta = BigRational::new(BigInt::from(delta.denom()), BigInt::from(delta.numer()));
    if (b as i64) < ceil_log2_rational(&inv_delta) + 6 {
        return Err(QsimError::PrecondViolated("b too small for delta"));
    }
    let three_quarters = Rational::new(3, 4).unwrap().to_big();
    let quarter = Rational::new(1, 4).unwrap().to_big();
    let mut any_large = false;
    for v in values {
        if v.is_negative() || v.format().trailing != values[0].format().trailing {
            return Err(QsimError::PrecondViolated("malformed input vector"));
        }
        let q = v.to_rational();
        if q > three_quarters {
            return Err(QsimError::PrecondViolated("entry above 3/4"));
        }
        if q >= quarter {
            any_large = true;
        }
    }
    if !any_large {
        return Err(QsimError::PrecondViolated("no entry >= 1/4"));
    }

    // Pad to a power of two (zeros contribute nothing to the sum).
    let n_pad = (values.len().next_power_of_two().max(2)) as u64;
    let k = n_pad.trailing_zeros();

    // zeta_j in (1, ceil(log2(n/delta)) + 4) format; the prepared state has
    // amplitudes sin(zeta_j) exactly, so v~_j = sin^2(zeta_j).
    let log_n_over_delta = ceil_log2_big(
        &(num_bigint::BigUint::from(n_pad) * delta.denom()),
        &num_bigint::BigUint::from(delta.numer()),
    )
    .max(1) as u32;
    let zeta_fmt = FpFormat::new(1, log_n_over_delta + 4);
    let mut sum_vt = Real::zero();
    for v in values {
        let zeta = arcsin_sqrt_fp(v, zeta_fmt)?;
        let s = zeta.to_real().sin();
        sum_vt = sum_vt + &(&s * &s);
    }
    let a = sum_vt.mul_pow2(-(k as i64));
    let phi = a.sqrt().asin().mul_pow2(1);

    let cfg = PhaseEstimationConfig::derive(n_pad, delta, eta)?;
    // omega for the +phi eigenphase; the -phi branch mirrors to N - omega.
    let omega_pos = (phi / &Real::pi().mul_pow2(1)).mul_pow2(cfg.t as i64);
    let sampler = PhaseSampler::new(&omega_pos, cfg.t);

    let gamma_fmt = FpFormat::new(1, log_n_over_delta + 8);
    let out_fmt = FpFormat::new(k + 1, b);

    let mut estimates: Vec<FixedPoint> = Vec::with_capacity(cfg.repetitions as usize);
    for rep in 0..cfg.repetitions {
        let mut stream = rng::stream(seed, &[0x51a5, rep as u64]);
        let positive: bool = stream.gen();
        let m = sampler.sample(positive, &mut stream);
        let beta = Dyadic { m: BigInt::from(m), bits: cfg.t };
        let gamma = sin_sq_pi_frac(&beta, gamma_fmt)?;
        // s~ = n * gamma, exact product rounded into the output format
        let scaled = Dyadic { m: gamma.to_dyadic().m << k, bits: gamma_fmt.trailing };
        estimates.push(scaled.encode(out_fmt)?);
    }
    estimates.sort_by(|x, y| x.cmp_value(y));
    let median = estimates[estimates.len() / 2].clone();

    let true_sum: BigRational = values.iter().map(|v| v.to_rational()).sum();
    let est = median.to_rational();
    let lo = (BigRational::one() - delta.to_big()) * &true_sum;
    let hi = (BigRational::one() + delta.to_big()) * &true_sum;
    let within = est >= lo && est <= hi;

    Ok(QasResult { value: median, charged_queries: cfg.charged_queries(), within_bounds: within })
}

/// Prepared outcome distribution of phase estimation for one eigenphase.
///
/// Probabilities for the `2w+1` outcomes nearest to `omega` are tabulated
/// once with a cumulative table for inversion sampling; the tail is
/// rejection-sampled under the envelope `1/(4u^2)`, valid because
/// `sin(pi u / N) >= 2u/N` for `|u| <= N/2`. Outcomes for the mirrored
/// eigenphase `-phi` are obtained as `N - m`, which is an exact symmetry of
/// the kernel.
struct PhaseSampler {
    t: u32,
    m0: u64,
    g: f64,
    sin2_pi_g: f64,
    /// `(outcome, cumulative probability)` over the window, or the full
    /// outcome space when it is small.
    cumulative: Vec<(u64, f64)>,
    window: u64,
    full: bool,
}

impl PhaseSampler {
    fn new(omega_pos: &Real, t: u32) -> Self {
        let n = 1u64 << t;
        let m0_big = omega_pos.floor_bigint();
        let m0 = u64::try_from(&m0_big % BigInt::from(n)).unwrap_or(0) % n;
        let g = (omega_pos - &Real::from_bigint(&m0_big)).to_f64();
        let sin2_pi_g = (std::f64::consts::PI * g).sin().powi(2);
        let nf = n as f64;
        let pmf = |u: f64| -> f64 {
            let s = (std::f64::consts::PI * u / nf).sin();
            sin2_pi_g / (nf * nf * s * s)
        };

        if g < 1e-14 || g > 1.0 - 1e-14 {
            // omega effectively on the grid: all mass on one outcome
            let hit = if g < 1e-14 { m0 } else { (m0 + 1) % n };
            return PhaseSampler {
                t,
                m0,
                g,
                sin2_pi_g,
                cumulative: vec![(hit, 1.0)],
                window: 0,
                full: true,
            };
        }

        let w = 64u64.max((n as f64).sqrt() as u64).min(n / 2);
        let mut acc = 0.0f64;
        let mut cumulative;
        let full = 2 * w + 1 >= n;
        if full {
            cumulative = Vec::with_capacity(n as usize);
            for m in 0..n {
                acc += pmf(Self::wrap_offset(m0, g, m, n));
                cumulative.push((m, acc));
            }
        } else {
            cumulative = Vec::with_capacity(2 * w as usize + 1);
            for kk in 0..=w {
                let m = (m0 + n - kk) % n;
                acc += pmf(g + kk as f64);
                cumulative.push((m, acc));
            }
            for kk in 0..w {
                let m = (m0 + 1 + kk) % n;
                acc += pmf(g - 1.0 - kk as f64);
                cumulative.push((m, acc));
            }
        }
        PhaseSampler { t, m0, g, sin2_pi_g, cumulative, window: w, full }
    }

    fn wrap_offset(m0: u64, g: f64, m: u64, n: u64) -> f64 {
        let nf = n as f64;
        let mut u = (m0 as f64 + g) - m as f64;
        let half = nf / 2.0;
        if u < -half {
            u += nf;
        } else if u >= half {
            u -= nf;
        }
        u
    }

    fn sample(&self, positive: bool, stream: &mut ChaCha12Rng) -> u64 {
        let n = 1u64 << self.t;
        let m = self.sample_positive(stream);
        if positive {
            m
        } else {
            (n - m) % n
        }
    }

    fn sample_positive(&self, stream: &mut ChaCha12Rng) -> u64 {
        let n = 1u64 << self.t;
        let total = self.cumulative.last().map(|&(_, c)| c).unwrap_or(1.0);
        let u: f64 = stream.gen();
        let target = if self.full { u * total } else { u };
        if self.full || target < total {
            let idx = self.cumulative.partition_point(|&(_, c)| c < target);
            return self.cumulative[idx.min(self.cumulative.len() - 1)].0;
        }
        // tail: uniform proposals under the constant envelope
        let w = self.window;
        let tail_len = n - (2 * w + 1);
        let bound = 1.0 / (4.0 * (w as f64) * (w as f64));
        let nf = n as f64;
        loop {
            let idx: u64 = stream.gen_range(0..tail_len);
            let m = (self.m0 + 1 + w + idx) % n;
            let uoff = Self::wrap_offset(self.m0, self.g, m, n);
            let s = (std::f64::consts::PI * uoff / nf).sin();
            let p = self.sin2_pi_g / (nf * nf * s * s);
            if stream.gen::<f64>() * bound < p {
                return m;
            }
        }
    }
}

/// Simulated quantum maximum finding over `a_j e^{y_j}`.
///
/// The returned index satisfies `e^{y_j - y_{j*}} a_j / a_{j*} <= 3/2` for
/// all `j` (computed deterministically by a full comparison pass); with
/// probability `eta` it is then replaced by a uniformly random index to model
/// subroutine failure. Charges `ceil(3 sqrt(n) ln(1/eta))` queries, the
/// logarithmic factor clamped to at least one; `eta = 0` models an idealized
/// run and charges a single round.
pub fn quantum_max_find(
    a: &[FixedPoint],
    y: &[FixedPoint],
    eta: &Rational,
    seed: u64,
) -> Result<(usize, u64, bool), QsimError> {
    let n = a.len();
    assert!(n > 0 && n == y.len());
    let best = approx_argmax(a, y)?;
    let ln_factor = if eta.is_zero() {
        1.0
    } else {
        (eta.denom() as f64 / eta.numer() as f64).ln().max(1.0)
    };
    let charged = (3.0 * (n as f64).sqrt() * ln_factor).ceil() as u64;
    if eta.is_zero() {
        return Ok((best, charged, true));
    }
    let mut stream = rng::stream(seed, &[0x3a7f]);
    let fail = stream.gen::<f64>() < eta.to_f64();
    if fail {
        Ok((stream.gen_range(0..n), charged, false))
    } else {
        Ok((best, charged, true))
    }
}

/// Exact outcome probability of the phase-estimation law (test oracle).
pub fn phase_outcome_probability(omega: &Real, t: u32, m: u64) -> f64 {
    let n = 1u64 << t;
    let nf = n as f64;
    let mut u = omega.to_f64() - m as f64;
    let half = nf / 2.0;
    while u < -half {
        u += nf;
    }
    while u >= half {
        u -= nf;
    }
    if u.abs() < 1e-14 {
        return 1.0;
    }
    let num = (std::f64::consts::PI * u).sin().powi(2);
    let den = (std::f64::consts::PI * u / nf).sin().powi(2);
    num / (nf * nf * den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::encode_rational;

    fn enc(num: u64, den: u64, fmt: FpFormat) -> FixedPoint {
        encode_rational(&Rational::new(num, den).unwrap(), fmt).unwrap()
    }

    fn q(n: u64, d: u64) -> Rational {
        Rational::new(n, d).unwrap()
    }

    #[test]
    fn rejects_out_of_range_entries() {
        let f = FpFormat::new(0, 12);
        let v = vec![enc(9, 10, f)];
        let r = quantum_approximate_sum(&v, 12, &q(1, 4), &q(1, 20), 1);
        assert!(matches!(r, Err(QsimError::PrecondViolated(_))));
        let v = vec![enc(1, 10, f)];
        let r = quantum_approximate_sum(&v, 12, &q(1, 4), &q(1, 20), 1);
        assert!(matches!(r, Err(QsimError::PrecondViolated(_))));
    }

    #[test]
    fn config_counts_match_schedule() {
        let cfg = PhaseEstimationConfig::derive(16, &q(1, 2), &q(1, 20)).unwrap();
        // sqrt(16)/0.5 = 8 -> t = 3 + 8
        assert_eq!(cfg.t, 11);
        assert_eq!(cfg.repetitions % 2, 1);
        assert_eq!(cfg.charged_queries(), cfg.repetitions as u64 * 2048 * 2);
    }

    #[test]
    fn single_spike_estimate() {
        let f = FpFormat::new(0, 14);
        let v = vec![enc(3, 4, f), FixedPoint::zero(f), FixedPoint::zero(f), FixedPoint::zero(f)];
        let mut hits = 0;
        for seed in 0..40 {
            let r = quantum_approximate_sum(&v, 14, &q(1, 10), &q(1, 20), seed).unwrap();
            let got = r.value.to_f64();
            if (got - 0.75).abs() <= 0.075 {
                hits += 1;
            }
        }
        assert!(hits >= 37, "only {hits}/40 inside bounds");
    }

    #[test]
    fn uniform_vector_estimate() {
        let f = FpFormat::new(0, 14);
        let v = vec![enc(1, 4, f); 4];
        let r = quantum_approximate_sum(&v, 14, &q(1, 10), &q(1, 20), 7).unwrap();
        assert!((r.value.to_f64() - 1.0).abs() <= 0.1);
    }

    #[test]
    fn max_find_modes() {
        let af = FpFormat::new(0, 8);
        let yf = FpFormat::new(3, 6);
        let a = vec![enc(1, 8, af), enc(3, 4, af), enc(1, 4, af)];
        let y = vec![FixedPoint::zero(yf); 3];
        let (j, charged, ok) = quantum_max_find(&a, &y, &Rational::zero(), 5).unwrap();
        assert_eq!(j, 1);
        assert!(ok);
        assert!(charged >= 3);
        // eta = 1 forces a uniformly random substitution
        let (_, _, ok) = quantum_max_find(&a, &y, &Rational::one(), 5).unwrap();
        assert!(!ok);
    }

    #[test]
    fn sampler_matches_analytic_law() {
        let t = 7u32;
        let n = 1u64 << t;
        let omega = Real::from_f64(13.37);
        let samples = 20_000usize;
        let mut counts = vec![0u64; n as usize];
        let sampler = PhaseSampler::new(&omega, t);
        for s in 0..samples {
            let mut stream = rng::stream(99, &[s as u64]);
            let m = sampler.sample(true, &mut stream);
            counts[m as usize] += 1;
        }
        // chi-squared: 8 nearest outcomes individually, remainder pooled
        let mut chi2 = 0.0;
        let mut pooled_obs = samples as f64;
        let mut pooled_exp = samples as f64;
        let mut bins = 0;
        for m in 10..=17u64 {
            let p = phase_outcome_probability(&omega, t, m);
            let e = p * samples as f64;
            let o = counts[m as usize] as f64;
            chi2 += (o - e) * (o - e) / e;
            pooled_obs -= o;
            pooled_exp -= e;
            bins += 1;
        }
        if pooled_exp > 5.0 {
            chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
            bins += 1;
        }
        let df = (bins - 1) as f64;
        let threshold = df + 4.0 * (2.0 * df).sqrt();
        assert!(chi2 < threshold, "chi2 {chi2} over threshold {threshold}");
    }

    #[test]
    fn median_failure_rate_below_eta() {
        let f = FpFormat::new(0, 16);
        let v = vec![enc(1, 4, f), enc(5, 8, f), enc(1, 16, f), enc(1, 2, f)];
        let eta = q(1, 10);
        let delta = q(1, 5);
        let runs = 400;
        let mut failures = 0;
        for seed in 0..runs {
            let r = quantum_approximate_sum(&v, 16, &delta, &eta, seed).unwrap();
            if !r.within_bounds {
                failures += 1;
            }
        }
        assert!(failures <= 60, "{failures}/{runs} failures");
    }
}
