//! Pluggable marginal estimators with a declared `(delta, eta)` contract.
//!
//! A scaling-factor query asks for a `delta`-additive approximation of
//! `ln(r / sum_j a_j e^{y_j})` over a row or column view. Three backends
//! answer it:
//!
//! * `Exact` evaluates at high precision and ignores `delta` and `eta`;
//! * `Classical` converts the rationals to fixed point, pivots on an
//!   approximately maximal `a_j e^{y_j}`, sums relative entries and assembles
//!   the logarithms. Deterministic, never fails.
//! * `QuantumSim` replaces the pivot search with simulated maximum finding
//!   and the sum with simulated amplitude estimation, both of which may fail
//!   with the probability the caller asked for.
//!
//! Query charging: the classical and exact paths charge one entry read per
//! listed element plus the scaling-vector reads; the quantum path charges the
//! simulator-reported count to the quantum column of the ledger.

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::fixedpoint::{
    ceil_log2_rational, encode_big_rational_saturating, ln_dyadic, Dyadic, FixedPoint, FpError,
    FpFormat, Rational,
};
use crate::hp::Real;
use crate::numerics::{approx_argmax, relative_entry_additive_approx};
use crate::oracle::{QueryLedger, SparseMatrix, TargetMarginals};
use crate::qsim::{self, QsimError};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EstimatorError {
    #[error("precondition violated: {0}")]
    PrecondViolated(&'static str),
    #[error("row or column has no non-zero entries")]
    EmptyRow,
    #[error(transparent)]
    Fp(#[from] FpError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Exact,
    Classical,
    QuantumSim,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(BackendKind::Exact),
            "classical" => Ok(BackendKind::Classical),
            "quantum-sim" => Ok(BackendKind::QuantumSim),
            other => Err(format!("unknown backend '{other}'")),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BackendKind::Exact => "exact",
            BackendKind::Classical => "classical",
            BackendKind::QuantumSim => "quantum-sim",
        };
        f.write_str(s)
    }
}

/// Backend configuration: estimator kind, its declared contract, and the
/// base seed from which every call derives its own random stream.
#[derive(Debug)]
pub struct EstimatorBackend {
    pub kind: BackendKind,
    pub delta: Rational,
    pub eta: Rational,
    pub rng_seed: u64,
    call_counter: AtomicU64,
}

impl EstimatorBackend {
    pub fn new(
        kind: BackendKind,
        delta: Rational,
        eta: Rational,
        rng_seed: u64,
    ) -> Result<Self, EstimatorError> {
        if delta.is_zero() || delta > Rational::one() {
            return Err(EstimatorError::PrecondViolated("delta outside (0, 1]"));
        }
        if eta > Rational::one() {
            return Err(EstimatorError::PrecondViolated("eta outside [0, 1]"));
        }
        Ok(EstimatorBackend { kind, delta, eta, rng_seed, call_counter: AtomicU64::new(0) })
    }

    /// Fresh stream tag for callers without a structured one.
    pub fn auto_tag(&self) -> u64 {
        self.call_counter.fetch_add(1, AtomicOrdering::Relaxed)
    }

    fn call_seed(&self, tag: u64, slot: u64) -> u64 {
        rng::mix(self.rng_seed, &[tag, slot])
    }
}

/// One row or column view for a scaling-factor query.
#[derive(Debug, Clone, Copy)]
pub struct AsfInput<'a> {
    /// Listed `(index, value)` pairs of the vector `a`.
    pub entries: &'a [(usize, Rational)],
    /// Target marginal `r in (0, 1]`.
    pub target: Rational,
    /// The opposing scaling vector; `entries` indices point into it.
    pub scalings: &'a [FixedPoint],
    /// Read the scaling vector negated (used by the balancing update).
    pub negate_scalings: bool,
    /// Ambient dimension `n` of the matrix (drives precision schedules).
    pub dim: usize,
    /// Lower bound on the non-zero entries of `a`.
    pub mu: Rational,
}

#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub value: FixedPoint,
    /// Whether all stochastic sub-steps declared success (bookkeeping for
    /// fault-injection analysis; deterministic backends always succeed).
    pub declared_success: bool,
    pub charged_queries: u64,
}

struct ConvertedView {
    a_hat: Vec<FixedPoint>,
    y_hat: Vec<FixedPoint>,
    b_a: u32,
}

/// Rational-to-fixed-point input conversion shared by the classical and
/// quantum paths: `a_j` in `(0, ceil(log2(1/(delta mu)) + 2))` format,
/// clamped at the top of the format (only reachable by `a_j = 1`).
fn convert_view(input: &AsfInput<'_>, delta: &Rational) -> Result<ConvertedView, EstimatorError> {
    let dm = delta.to_big() * input.mu.to_big();
    let b_a = ceil_log2_rational(&(BigRational::from_integer(4.into()) / dm)).max(1) as u32;
    let fmt_a = FpFormat::new(0, b_a);
    let mut a_hat = Vec::with_capacity(input.entries.len());
    let mut y_hat = Vec::with_capacity(input.entries.len());
    for &(j, v) in input.entries {
        a_hat.push(encode_big_rational_saturating(&v.to_big(), fmt_a));
        let y = &input.scalings[j];
        y_hat.push(if input.negate_scalings { y.neg() } else { y.clone() });
    }
    Ok(ConvertedView { a_hat, y_hat, b_a })
}

/// `r` in `(0, ceil(log2(1/(r delta)) + 2))` format.
fn convert_target(r: &Rational, delta: &Rational) -> Result<FixedPoint, EstimatorError> {
    if r.is_zero() {
        return Err(EstimatorError::PrecondViolated("target marginal must be positive"));
    }
    let rd = r.to_big() * delta.to_big();
    let b_r = ceil_log2_rational(&(BigRational::from_integer(4.into()) / rd)).max(1) as u32;
    Ok(encode_big_rational_saturating(&r.to_big(), FpFormat::new(0, b_r)))
}

/// Trailing bits for the logarithm estimates: `ceil(log2(1/delta') + 3)`.
fn log_trailing(delta_prime: &BigRational) -> u32 {
    ceil_log2_rational(&(BigRational::from_integer(8.into()) / delta_prime)).max(1) as u32
}

/// Leading bits sufficient for `|ln S|` with `S <= 4n`.
fn ln_leading_for_sum(n: usize) -> u32 {
    let l = 64 - (n as u64).leading_zeros() as u64 + 2;
    64 - l.max(1).leading_zeros()
}

/// `delta`-additive approximation of `ln(r / sum_j a_j e^{y_j})` in
/// `(b1, b2)` format, with success probability at least `1 - eta`.
///
/// `b2 >= ceil(log2(1/delta))` is checked up front; the matching `b1`
/// requirement cannot be checked without the answer, so values that do not
/// fit are clamped to the format boundary, which is the register behaviour
/// of the model.
#[allow(clippy::too_many_arguments)]
pub fn approx_scaling_factor(
    backend: &EstimatorBackend,
    input: &AsfInput<'_>,
    delta: &Rational,
    b1: u32,
    b2: u32,
    eta: &Rational,
    ledger: &QueryLedger,
    tag: u64,
) -> Result<EstimateOutcome, EstimatorError> {
    if delta.is_zero() || delta > &Rational::one() {
        return Err(EstimatorError::PrecondViolated("delta outside (0, 1]"));
    }
    let inv_delta = BigRational::new(BigInt::from(delta.denom()), BigInt::from(delta.numer()));
    if (b2 as i64) < ceil_log2_rational(&inv_delta) {
        return Err(EstimatorError::PrecondViolated("b2 too small for delta"));
    }
    if input.entries.is_empty() || input.entries.iter().all(|(_, v)| v.is_zero()) {
        return Err(EstimatorError::EmptyRow);
    }
    let out_fmt = FpFormat::new(b1, b2);
    let s = input.entries.len() as u64;

    match backend.kind {
        BackendKind::Exact => {
            ledger.charge_entries(s);
            ledger.charge_scaling_reads(s);
            let mut denom = Real::zero();
            for &(j, v) in input.entries {
                let yv = input.scalings[j].to_real();
                let yv = if input.negate_scalings { -&yv } else { yv };
                denom = denom + &(v.to_real() * &yv.exp());
            }
            let value = input.target.to_real().ln() - &denom.ln();
            let enc = encode_big_rational_saturating(&real_to_rational_approx(&value, b2 + 8), out_fmt);
            Ok(EstimateOutcome { value: enc, declared_success: true, charged_queries: s })
        }
        BackendKind::Classical => {
            ledger.charge_entries(s);
            ledger.charge_scaling_reads(s);
            let view = convert_view(input, delta)?;
            let r_hat = convert_target(&input.target, delta)?;
            let delta_prime = delta.to_big() / BigRational::from_integer(2.into());
            // c = ceil(log2(n / delta') + 4)
            let c = ceil_log2_rational(
                &(BigRational::from_integer(BigInt::from(16 * input.dim as u64)) / &delta_prime),
            )
            .max(1) as u32;
            let pivot = approx_argmax(&view.a_hat, &view.y_hat)?;
            let value =
                assemble_from_relative_sum(&view, pivot, c, None, &delta_prime, &r_hat, input.dim)?;
            Ok(EstimateOutcome {
                value: value.encode_saturating(out_fmt),
                declared_success: true,
                charged_queries: s,
            })
        }
        BackendKind::QuantumSim => {
            let view = convert_view(input, delta)?;
            let r_hat = convert_target(&input.target, delta)?;
            let delta_prime = delta.to_big() / BigRational::from_integer(2.into());
            // c = ceil(log2(n / delta')) + 6
            let c = ceil_log2_rational(
                &(BigRational::from_integer(BigInt::from(input.dim as u64)) / &delta_prime),
            )
            .max(1) as u32
                + 6;
            let eta_half = rational_div(eta, 2)?;
            let (pivot, mf_charge, mf_ok) =
                qsim::quantum_max_find(&view.a_hat, &view.y_hat, &eta_half, backend.call_seed(tag, 1))?;
            let (sum_half, qas_charge, qas_ok) =
                quantum_relative_sum(&view, pivot, c, &delta_prime, &eta_half, backend.call_seed(tag, 2))?;
            ledger.charge_quantum(mf_charge + qas_charge);
            let value = assemble_from_relative_sum(
                &view, pivot, c, Some(sum_half), &delta_prime, &r_hat, input.dim,
            )?;
            Ok(EstimateOutcome {
                value: value.encode_saturating(out_fmt),
                declared_success: mf_ok && qas_ok,
                charged_queries: mf_charge + qas_charge,
            })
        }
    }
}

/// Round a high-precision real onto a dyadic grid.
fn real_to_dyadic(v: &Real, bits: u32) -> Dyadic {
    let scaled = v.mul_pow2(bits as i64);
    let m = (scaled + &Real::from_ratio(1, 2)).floor_bigint();
    Dyadic { m, bits }
}

fn real_to_rational_approx(v: &Real, bits: u32) -> BigRational {
    real_to_dyadic(v, bits).to_rational()
}

fn rational_div(q: &Rational, k: u64) -> Result<Rational, EstimatorError> {
    q.denom()
        .checked_mul(k)
        .and_then(|d| Rational::new(q.numer(), d).ok())
        .ok_or(EstimatorError::PrecondViolated("precision parameter overflow"))
}

fn rational_from_big(q: &BigRational) -> Result<Rational, EstimatorError> {
    let num: u64 =
        q.numer().try_into().map_err(|_| EstimatorError::PrecondViolated("parameter overflow"))?;
    let den: u64 =
        q.denom().try_into().map_err(|_| EstimatorError::PrecondViolated("parameter overflow"))?;
    Rational::new(num, den).map_err(|_| EstimatorError::PrecondViolated("parameter overflow"))
}

/// Classical relative-entry sum `S` against the pivot, exact on the `2^-c` grid.
fn classical_relative_sum(view: &ConvertedView, pivot: usize, c: u32) -> Result<Dyadic, EstimatorError> {
    let mut acc = Dyadic { m: BigInt::zero(), bits: c };
    for j in 0..view.a_hat.len() {
        let xi = relative_entry_additive_approx(
            &view.a_hat[j],
            &view.a_hat[pivot],
            &view.y_hat[j],
            &view.y_hat[pivot],
            c,
            1,
        )?;
        acc = acc.add(&xi.to_dyadic());
    }
    Ok(acc)
}

/// Quantum path: sum of `v_j = REAA(...) / 2` by amplitude estimation, with
/// multiplicative error `delta'/32` and failure probability `eta`. Returns
/// the estimate of `S / 2` on the `2^-(c+1)` grid.
fn quantum_relative_sum(
    view: &ConvertedView,
    pivot: usize,
    c: u32,
    delta_prime: &BigRational,
    eta: &Rational,
    seed: u64,
) -> Result<(Dyadic, u64, bool), EstimatorError> {
    let v_fmt = FpFormat::new(0, c + 1);
    let cap = BigRational::new(3.into(), 4.into());
    let mut v = Vec::with_capacity(view.a_hat.len());
    for j in 0..view.a_hat.len() {
        let xi = relative_entry_additive_approx(
            &view.a_hat[j],
            &view.a_hat[pivot],
            &view.y_hat[j],
            &view.y_hat[pivot],
            c,
            1,
        )?;
        let half = xi.to_rational() / BigRational::from_integer(2.into());
        let clamped = if half > cap { cap.clone() } else { half };
        v.push(crate::fixedpoint::encode_big_rational(&clamped, v_fmt)?);
    }
    let delta_qas = rational_from_big(&(delta_prime / BigRational::from_integer(32.into())))?;
    let inv = BigRational::new(BigInt::from(delta_qas.denom()), BigInt::from(delta_qas.numer()));
    let b_qas = (c + 1).max(ceil_log2_rational(&inv) as u32 + 6);
    let res = qsim::quantum_approximate_sum(&v, b_qas, &delta_qas, eta, seed)?;
    let mut s_prime = res.value.to_dyadic().round_to_bits(c + 1);
    if s_prime.is_zero() {
        // a failed shot collapsed to zero; clamp to one ulp so the logarithm
        // stays defined (the run is already declared unsuccessful)
        s_prime = Dyadic { m: BigInt::one(), bits: c + 1 };
    }
    Ok((s_prime, res.charged_queries, res.within_bounds))
}

/// Assemble `beta - (y_pivot + gamma + alpha)` from the relative sum.
///
/// `quantum_sum`, when present, is `S'` with `2 S'` standing in for `S`.
fn assemble_from_relative_sum(
    view: &ConvertedView,
    pivot: usize,
    c: u32,
    quantum_sum: Option<Dyadic>,
    delta_prime: &BigRational,
    r_hat: &FixedPoint,
    dim: usize,
) -> Result<Dyadic, EstimatorError> {
    let t_log = log_trailing(delta_prime);
    let lead = ln_leading_for_sum(dim);
    let sum = match quantum_sum {
        Some(s_prime) => Dyadic { m: s_prime.m << 1, bits: s_prime.bits },
        None => classical_relative_sum(view, pivot, c)?,
    };
    let alpha = ln_dyadic(&sum, FpFormat::new(lead, t_log))?;
    let r_big = r_hat.to_rational();
    let lr = if r_big >= BigRational::one() {
        0
    } else {
        2 * ceil_log2_rational(&r_big.recip()).max(0) as u32
    };
    let beta = ln_dyadic(&r_hat.to_dyadic(), FpFormat::new(lr, t_log))?;
    let gamma = ln_dyadic(&view.a_hat[pivot].to_dyadic(), FpFormat::new(view.b_a.max(1), t_log))?;
    let y_pivot = view.y_hat[pivot].to_dyadic();
    Ok(beta.to_dyadic().sub(&y_pivot).sub(&gamma.to_dyadic()).sub(&alpha.to_dyadic()))
}

/// Multiplicative `(1 +/- delta)` estimate of `min{ ||A(x, y)||_1, 20 }`,
/// with success probability at least `1 - eta`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_total_mass(
    backend: &EstimatorBackend,
    a: &SparseMatrix,
    x: &[FixedPoint],
    y: &[FixedPoint],
    delta: &Rational,
    eta: &Rational,
    ledger: &QueryLedger,
    tag: u64,
) -> Result<EstimateOutcome, EstimatorError> {
    if delta.is_zero() || delta >= &Rational::one() {
        return Err(EstimatorError::PrecondViolated("delta outside (0, 1)"));
    }
    let twenty = BigRational::from_integer(20.into());
    let m_count = a.nnz() as u64;

    if backend.kind == BackendKind::Exact {
        ledger.charge_entries(m_count);
        let xs: Vec<Real> = x.iter().map(|v| v.to_real()).collect();
        let ys: Vec<Real> = y.iter().map(|v| v.to_real()).collect();
        let mass = crate::oracle::mass_exact(a, &xs, &ys);
        let capped = mass.min(&Real::from_u64(20));
        let log_mass = capped.ln();
        let value = if log_mass.is_finite() {
            encode_mass_dyadic(&real_to_dyadic(&log_mass, 160), delta)?
        } else {
            FixedPoint::zero(FpFormat::new(6, 8))
        };
        return Ok(EstimateOutcome { value, declared_success: true, charged_queries: m_count });
    }

    // flatten the matrix into one view over (value, x_i + y_j)
    let base_fmt = x.first().map(|v| v.format()).unwrap_or(FpFormat::new(1, 0));
    let sum_fmt = FpFormat::new(base_fmt.leading + 1, base_fmt.trailing.max(y.first().map(|v| v.format().trailing).unwrap_or(0)));
    let mut entries = Vec::with_capacity(a.nnz());
    let mut shifts = Vec::with_capacity(a.nnz());
    for i in 0..a.dim() {
        for &(j, v) in a.row_entries(i) {
            entries.push((shifts.len(), v));
            let s = x[i].to_dyadic().add(&y[j].to_dyadic());
            shifts.push(s.encode(sum_fmt).map_err(EstimatorError::Fp)?);
        }
    }
    let input = AsfInput {
        entries: &entries,
        target: Rational::one(),
        scalings: &shifts,
        negate_scalings: false,
        dim: a.nnz().max(1),
        mu: a.mu(),
    };
    let view = convert_view(&input, delta)?;
    let delta_prime = delta.to_big() / BigRational::from_integer(2.into());
    let t_log = log_trailing(&delta_prime);

    let (alpha, pivot, charged, ok) = match backend.kind {
        BackendKind::Classical => {
            ledger.charge_entries(m_count);
            ledger.charge_scaling_reads(2 * a.dim() as u64);
            let c = ceil_log2_rational(
                &(BigRational::from_integer(BigInt::from(16 * input.dim as u64)) / &delta_prime),
            )
            .max(1) as u32;
            let pivot = approx_argmax(&view.a_hat, &view.y_hat)?;
            let sum = classical_relative_sum(&view, pivot, c)?;
            let alpha = ln_dyadic(&sum, FpFormat::new(ln_leading_for_sum(input.dim), t_log))?;
            (alpha.to_dyadic(), pivot, m_count, true)
        }
        BackendKind::QuantumSim => {
            let eta_half = rational_div(eta, 2)?;
            let c = ceil_log2_rational(
                &(BigRational::from_integer(BigInt::from(input.dim as u64)) / &delta_prime),
            )
            .max(1) as u32
                + 6;
            let (pivot, mf_charge, mf_ok) =
                qsim::quantum_max_find(&view.a_hat, &view.y_hat, &eta_half, backend.call_seed(tag, 3))?;
            let (s_prime, qas_charge, qas_ok) =
                quantum_relative_sum(&view, pivot, c, &delta_prime, &eta_half, backend.call_seed(tag, 4))?;
            ledger.charge_quantum(mf_charge + qas_charge);
            let doubled = Dyadic { m: s_prime.m << 1, bits: s_prime.bits };
            let alpha = ln_dyadic(&doubled, FpFormat::new(ln_leading_for_sum(input.dim), t_log))?;
            (alpha.to_dyadic(), pivot, mf_charge + qas_charge, mf_ok && qas_ok)
        }
        BackendKind::Exact => unreachable!(),
    };

    // ln ||A(x,y)||_1 = ln(relative sum) + ln(pivot value) + pivot shift;
    // only the logarithm of the largest entry is ever formed explicitly.
    let ln_pivot = ln_dyadic(&view.a_hat[pivot].to_dyadic(), FpFormat::new(view.b_a.max(1), t_log))?;
    let log_mass = alpha.add(&ln_pivot.to_dyadic()).add(&view.y_hat[pivot].to_dyadic());

    let ln21_hi = BigRational::new(784.into(), 256.into()); // above ln 21
    let value = if log_mass.to_rational() >= ln21_hi {
        crate::fixedpoint::encode_big_rational(&twenty, FpFormat::new(5, 8))?
    } else {
        let enc = encode_mass_dyadic(&log_mass, delta)?;
        if enc.to_rational() > twenty {
            crate::fixedpoint::encode_big_rational(&twenty, FpFormat::new(5, 8))?
        } else {
            enc
        }
    };
    Ok(EstimateOutcome { value, declared_success: ok, charged_queries: charged })
}

/// Exponentiate a log-mass estimate with enough trailing bits that the
/// result keeps its relative accuracy even for small masses.
fn encode_mass_dyadic(log_mass: &Dyadic, delta: &Rational) -> Result<FixedPoint, EstimatorError> {
    let inv_delta = BigRational::new(BigInt::from(delta.denom()), BigInt::from(delta.numer()));
    let base = ceil_log2_rational(&inv_delta).max(1) as u32 + 6;
    let extra = if log_mass.m.is_negative() {
        let mag = log_mass.to_real().abs().to_f64();
        (mag * std::f64::consts::LOG2_E).ceil() as u32 + 2
    } else {
        0
    };
    crate::fixedpoint::exp_dyadic(log_mass, FpFormat::new(6, base + extra)).map_err(Into::into)
}

/// Scaling test: `true` certifies both relative entropies are below
/// `2 delta`, `false` certifies at least one is above `delta`, with
/// probability `1 - eta` over the backend randomness.
///
/// Structure: a `(1 +/- delta/80)` mass estimate with failure share `eta/2`
/// (early `false` when the estimate reaches 10), then per-row and per-column
/// scaling factors at precision `delta/4`, failure share `eta/4n`, output
/// formats `(b1, b2 + 2)`; accepts iff both assembled divergence estimates
/// are at most `3 delta / 2` (equality accepts).
#[allow(clippy::too_many_arguments)]
pub fn test_scaling(
    backend: &EstimatorBackend,
    a: &SparseMatrix,
    targets: &TargetMarginals,
    x: &[FixedPoint],
    y: &[FixedPoint],
    delta: &Rational,
    b1: u32,
    b2: u32,
    eta: &Rational,
    mu: Rational,
    ledger: &QueryLedger,
    tag: u64,
) -> Result<bool, EstimatorError> {
    let n = a.dim();
    let delta_mass = rational_div(delta, 80)?;
    let eta_half = rational_div(eta, 2)?;
    let gamma =
        estimate_total_mass(backend, a, x, y, &delta_mass, &eta_half, ledger, rng::mix(tag, &[0]))?;
    let gamma_q = gamma.value.to_rational();
    if gamma_q >= BigRational::from_integer(10.into()) {
        return Ok(false);
    }

    let delta_quarter = rational_div(delta, 4)?;
    let eta_row = rational_div(eta, 4 * n as u64)?;
    let mut row_term = BigRational::zero();
    for l in 0..n {
        let input = AsfInput {
            entries: a.row_entries(l),
            target: targets.r[l],
            scalings: y,
            negate_scalings: false,
            dim: n,
            mu,
        };
        let out = approx_scaling_factor(
            backend,
            &input,
            &delta_quarter,
            b1,
            b2 + 2,
            &eta_row,
            ledger,
            rng::mix(tag, &[1, l as u64]),
        )?;
        let a_l = out.value.to_rational() - x[l].to_rational();
        row_term += targets.r[l].to_big() * a_l;
    }
    let mut col_term = BigRational::zero();
    for l in 0..n {
        let input = AsfInput {
            entries: a.col_entries(l),
            target: targets.c[l],
            scalings: x,
            negate_scalings: false,
            dim: n,
            mu,
        };
        let out = approx_scaling_factor(
            backend,
            &input,
            &delta_quarter,
            b1,
            b2 + 2,
            &eta_row,
            ledger,
            rng::mix(tag, &[2, l as u64]),
        )?;
        let b_l = out.value.to_rational() - y[l].to_rational();
        col_term += targets.c[l].to_big() * b_l;
    }

    let threshold = delta.to_big() * BigRational::new(3.into(), 2.into());
    let base = gamma_q - BigRational::one();
    Ok(&base + row_term <= threshold && base + col_term <= threshold)
}
