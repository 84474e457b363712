//! Sinkhorn scaling: full sweeps with per-iteration testing, the randomized
//! single-coordinate variant, and a faster schedule for entrywise-positive
//! matrices.
//!
//! Parameter derivation is part of the contract: each variant's iteration
//! budget, update precision, per-call failure share and fixed-point format
//! are computed from the instance so that the returned scaling meets its
//! advertised guarantee with the advertised probability.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics;
use crate::estimators::{
    approx_scaling_factor, test_scaling, AsfInput, EstimatorBackend, EstimatorError,
};
use crate::fixedpoint::{ceil_log2_rational, FixedPoint, FpFormat, Rational};
use crate::hp::Real;
use crate::oracle::{QueryLedger, SparseMatrix, TargetMarginals};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("matrix must be entrywise positive for this preset")]
    NotEntrywisePositive,
    #[error("instance violates the model preconditions: {0}")]
    BadInstance(&'static str),
    #[error("parameter derivation overflowed")]
    ParamOverflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinkhornVariant {
    FullTesting,
    Randomized,
    PositiveFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TestPassed,
    Exhausted,
    RandomStop,
}

/// Solver schedule: iteration budget, precisions, failure shares and the
/// fixed-point format of the scaling vectors.
#[derive(Debug, Clone)]
pub struct SinkhornParams {
    pub variant: SinkhornVariant,
    pub t_max: u64,
    pub delta: Rational,
    pub delta_prime: Rational,
    pub eta: Rational,
    pub b1: u32,
    pub b2: u32,
    pub epsilon: Rational,
    /// Target failure probability (randomized variant only).
    pub p: Option<Rational>,
}

/// Scaling vectors plus iteration metadata.
#[derive(Debug, Clone)]
pub struct ScalingState {
    pub x: Vec<FixedPoint>,
    pub y: Vec<FixedPoint>,
    pub iteration: u64,
    pub stopped: StopReason,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: u64,
    pub potential: f64,
    pub d_row: f64,
    pub d_col: f64,
    pub l1_row: f64,
    pub l1_col: f64,
    pub classical_queries: u64,
    pub quantum_queries: u64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

/// `ceil` of a positive high-precision value into a u64.
fn ceil_to_u64(v: &Real) -> Result<u64, SolverError> {
    let c = v.ceil_bigint();
    let c = c.max(BigInt::from(0));
    c.to_u64().ok_or(SolverError::ParamOverflow)
}

fn log2_ceil_real(v: &Real) -> Result<u32, SolverError> {
    let l2 = v.ln() / &Real::from_u64(2).ln();
    let c = l2.ceil_bigint().max(BigInt::from(0));
    c.to_u64().map(|v| v as u32).ok_or(SolverError::ParamOverflow)
}

fn rational_scaled(q: &Rational, num_mul: u64, den_mul: u64) -> Result<Rational, SolverError> {
    let n = q.numer().checked_mul(num_mul).ok_or(SolverError::ParamOverflow)?;
    let d = q.denom().checked_mul(den_mul).ok_or(SolverError::ParamOverflow)?;
    Rational::new(n, d).map_err(|_| SolverError::ParamOverflow)
}

fn b2_for(delta: &Rational) -> u32 {
    let inv = BigRational::new(BigInt::from(delta.denom()), BigInt::from(delta.numer()));
    ceil_log2_rational(&inv).max(0) as u32
}

fn eta_uniform(n: usize, t: u64) -> Result<Rational, SolverError> {
    let den = 3u64
        .checked_mul(n as u64 + 1)
        .and_then(|v| v.checked_mul(t))
        .ok_or(SolverError::ParamOverflow)?;
    Rational::new(1, den).map_err(|_| SolverError::ParamOverflow)
}

/// Schedule for the tested full-sweep solver: `T = ceil((8/eps) ln(1/mu)) + 1`,
/// `delta = eps/16`, `delta' = eps/2`, `eta = 1/(3(n+1)T)`,
/// `b2 = ceil(log2(1/delta))`, `b1 = ceil(log2 T + log2(ln(1/mu) + sigma + 1))`.
pub fn derive_params_full(
    n: usize,
    mu: &Rational,
    sigma: &Real,
    epsilon: &Rational,
) -> Result<SinkhornParams, SolverError> {
    if epsilon.is_zero() || epsilon > &Rational::one() {
        return Err(SolverError::BadInstance("epsilon outside (0, 1]"));
    }
    let ln_inv_mu = (Real::from_u64(mu.denom()) / &Real::from_u64(mu.numer())).ln();
    let eight_over_eps = Real::from_u64(8 * epsilon.denom()) / &Real::from_u64(epsilon.numer());
    let t = ceil_to_u64(&(eight_over_eps * &ln_inv_mu))? + 1;
    let delta = rational_scaled(epsilon, 1, 16)?;
    let delta_prime = rational_scaled(epsilon, 1, 2)?;
    let eta = eta_uniform(n, t)?;
    let b2 = b2_for(&delta);
    let scale = &ln_inv_mu + &(sigma + &Real::one());
    let b1 = log2_ceil_real(&(Real::from_u64(t) * &scale))?;
    Ok(SinkhornParams {
        variant: SinkhornVariant::FullTesting,
        t_max: t.max(1),
        delta,
        delta_prime,
        eta,
        b1,
        b2,
        epsilon: *epsilon,
        p: None,
    })
}

/// Schedule for the randomized solver: `T = ceil((6n/(eps p)) ln(1/mu))`,
/// `delta = eps p / 12`, `eta = p / (6 n T)`.
pub fn derive_params_randomized(
    n: usize,
    mu: &Rational,
    sigma: &Real,
    epsilon: &Rational,
    p: &Rational,
) -> Result<SinkhornParams, SolverError> {
    if epsilon.is_zero() || epsilon > &Rational::one() {
        return Err(SolverError::BadInstance("epsilon outside (0, 1]"));
    }
    if p.is_zero() || p > &Rational::one() {
        return Err(SolverError::BadInstance("p outside (0, 1]"));
    }
    let ln_inv_mu = (Real::from_u64(mu.denom()) / &Real::from_u64(mu.numer())).ln();
    let num = 6u64
        .checked_mul(n as u64)
        .and_then(|v| v.checked_mul(epsilon.denom()))
        .and_then(|v| v.checked_mul(p.denom()))
        .ok_or(SolverError::ParamOverflow)?;
    let den = epsilon.numer().checked_mul(p.numer()).ok_or(SolverError::ParamOverflow)?;
    let factor = Real::from_u64(num) / &Real::from_u64(den);
    let t = ceil_to_u64(&(factor * &ln_inv_mu))?.max(1);
    let delta_big =
        epsilon.to_big() * p.to_big() / BigRational::from_integer(12.into());
    let delta = Rational::new(
        delta_big.numer().to_u64().ok_or(SolverError::ParamOverflow)?,
        delta_big.denom().to_u64().ok_or(SolverError::ParamOverflow)?,
    )
    .map_err(|_| SolverError::ParamOverflow)?;
    let eta_den = 6u64
        .checked_mul(n as u64)
        .and_then(|v| v.checked_mul(t))
        .and_then(|v| v.checked_mul(p.denom()))
        .ok_or(SolverError::ParamOverflow)?;
    let eta = Rational::new(p.numer(), eta_den).map_err(|_| SolverError::ParamOverflow)?;
    let b2 = b2_for(&delta);
    let scale = &ln_inv_mu + &(sigma + &Real::one());
    let b1 = log2_ceil_real(&(Real::from_u64(t) * &scale))?;
    Ok(SinkhornParams {
        variant: SinkhornVariant::Randomized,
        t_max: t,
        delta,
        delta_prime: rational_scaled(epsilon, 1, 2)?,
        eta,
        b1,
        b2,
        epsilon: *epsilon,
        p: Some(*p),
    })
}

/// Schedule for entrywise-positive matrices:
/// `T = ceil((32 ln(1/mu) + log2(2/eps)(1 + 34 C)) / sqrt(eps))` with
/// `C = delta + ln(r_max/r_min) + ln(c_max/c_min) + ln(nu/mu)` and
/// `delta = eps/64`.
pub fn derive_params_positive(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    epsilon: &Rational,
) -> Result<SinkhornParams, SolverError> {
    if !a.entrywise_positive() {
        return Err(SolverError::NotEntrywisePositive);
    }
    if epsilon.is_zero() || epsilon > &Rational::one() {
        return Err(SolverError::BadInstance("epsilon outside (0, 1]"));
    }
    let n = a.dim();
    let mu = a.mu();
    let nu = a.max_entry();
    let delta = rational_scaled(epsilon, 1, 64)?;
    let r_max = targets.r.iter().max().unwrap();
    let r_min = targets.r.iter().min().unwrap();
    let c_max = targets.c.iter().max().unwrap();
    let c_min = targets.c.iter().min().unwrap();
    let ratio = |hi: &Rational, lo: &Rational| (hi.to_real() / &lo.to_real()).ln();
    let c_const = delta.to_real()
        + &(ratio(r_max, r_min) + &(ratio(c_max, c_min) + &ratio(&nu, &mu)));
    let ln_inv_mu = (Real::from_u64(mu.denom()) / &Real::from_u64(mu.numer())).ln();
    // log2(2/eps)
    let log_term = (Real::from_u64(2 * epsilon.denom()) / &Real::from_u64(epsilon.numer())).ln()
        / &Real::from_u64(2).ln();
    let numerator = Real::from_u64(32) * &ln_inv_mu
        + &(log_term * &(Real::one() + &(Real::from_u64(34) * &c_const)));
    let sqrt_eps = epsilon.to_real().sqrt();
    let t = ceil_to_u64(&(numerator / &sqrt_eps))?.max(1);
    let eta = eta_uniform(n, t)?;
    let b2 = b2_for(&delta);
    let sigma = targets.sigma();
    let scale = &ln_inv_mu + &(&sigma + &Real::one());
    let b1 = log2_ceil_real(&(Real::from_u64(t) * &scale))?;
    Ok(SinkhornParams {
        variant: SinkhornVariant::PositiveFast,
        t_max: t,
        delta,
        delta_prime: rational_scaled(epsilon, 1, 2)?,
        eta,
        b1,
        b2,
        epsilon: *epsilon,
        p: None,
    })
}

fn sweep_threads() -> usize {
    std::env::var("SCALEBAL_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

fn check_instance(a: &SparseMatrix, targets: &TargetMarginals) -> Result<(), SolverError> {
    if !a.total_mass_capped() {
        return Err(SolverError::BadInstance("total mass exceeds one"));
    }
    if targets.len() != a.dim() {
        return Err(SolverError::BadInstance("marginal length mismatch"));
    }
    Ok(())
}

fn trace_row(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    x: &[FixedPoint],
    y: &[FixedPoint],
    t: u64,
    ledger: &QueryLedger,
) -> TraceRow {
    let xs: Vec<Real> = x.iter().map(|v| v.to_real()).collect();
    let ys: Vec<Real> = y.iter().map(|v| v.to_real()).collect();
    let report = diagnostics::metric_report(a, targets, &xs, &ys);
    let snap = ledger.snapshot();
    TraceRow {
        t,
        potential: report.potential,
        d_row: report.d_row,
        d_col: report.d_col,
        l1_row: report.l1_row,
        l1_col: report.l1_col,
        classical_queries: snap.entry_queries,
        quantum_queries: snap.quantum_charged_queries,
    }
}

/// Full Sinkhorn with testing: odd iterations re-solve every row scaling,
/// even iterations every column scaling, and each iteration ends with a
/// scaling test that stops the solver early on success.
///
/// Row updates within a sweep read only the previous opposing vector, so the
/// sweep may run on multiple threads (capped by `SCALEBAL_THREADS`); results
/// are identical either way because each update draws from a stream derived
/// from `(seed, t, l)`.
pub fn run_full_sinkhorn(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    backend: &EstimatorBackend,
    params: &SinkhornParams,
    ledger: &QueryLedger,
    with_trace: bool,
) -> Result<(ScalingState, ConvergenceTrace), SolverError> {
    check_instance(a, targets)?;
    let n = a.dim();
    let fmt = FpFormat::new(params.b1, params.b2);
    let mu = a.mu();
    let mut x = vec![FixedPoint::zero(fmt); n];
    let mut y = vec![FixedPoint::zero(fmt); n];
    let mut trace = ConvergenceTrace::default();

    let threads = sweep_threads();
    let pool = if threads > 1 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
    } else {
        None
    };

    for t in 1..=params.t_max {
        let update = |l: usize| -> Result<FixedPoint, EstimatorError> {
            let (entries, target, scalings) = if t % 2 == 1 {
                (a.row_entries(l), targets.r[l], &y)
            } else {
                (a.col_entries(l), targets.c[l], &x)
            };
            let input = AsfInput {
                entries,
                target,
                scalings,
                negate_scalings: false,
                dim: n,
                mu,
            };
            Ok(approx_scaling_factor(
                backend,
                &input,
                &params.delta,
                params.b1,
                params.b2,
                &params.eta,
                ledger,
                rng::mix(t, &[l as u64]),
            )?
            .value)
        };
        let updated: Result<Vec<FixedPoint>, EstimatorError> = match &pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(update).collect()),
            None => (0..n).map(update).collect(),
        };
        let updated = updated?;
        if t % 2 == 1 {
            x = updated;
        } else {
            y = updated;
        }

        if with_trace {
            trace.rows.push(trace_row(a, targets, &x, &y, t, ledger));
        }

        let passed = test_scaling(
            backend,
            a,
            targets,
            &x,
            &y,
            &params.delta_prime,
            params.b1,
            params.b2,
            &params.eta,
            mu,
            ledger,
            rng::mix(t, &[u64::MAX]),
        )?;
        if passed {
            return Ok((ScalingState { x, y, iteration: t, stopped: StopReason::TestPassed }, trace));
        }
    }
    Ok((
        ScalingState { x, y, iteration: params.t_max, stopped: StopReason::Exhausted },
        trace,
    ))
}

/// Randomized Sinkhorn: each iteration updates one uniformly random row or
/// column coordinate; the returned state is the one recorded just before a
/// uniformly random stopping iteration `tau in [T]`.
pub fn run_randomized_sinkhorn(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    backend: &EstimatorBackend,
    params: &SinkhornParams,
    ledger: &QueryLedger,
    with_trace: bool,
) -> Result<(ScalingState, ConvergenceTrace), SolverError> {
    check_instance(a, targets)?;
    let n = a.dim();
    let fmt = FpFormat::new(params.b1, params.b2);
    let mu = a.mu();
    let mut x = vec![FixedPoint::zero(fmt); n];
    let mut y = vec![FixedPoint::zero(fmt); n];
    let mut trace = ConvergenceTrace::default();

    let mut tau_stream = rng::stream(backend.rng_seed, &[0x7a0]);
    let tau: u64 = tau_stream.gen_range(1..=params.t_max);

    for t in 1..tau {
        let mut pick = rng::stream(backend.rng_seed, &[0x91c, t]);
        let rows: bool = pick.gen();
        let l: usize = pick.gen_range(0..n);
        let (entries, target, scalings) = if rows {
            (a.row_entries(l), targets.r[l], &y)
        } else {
            (a.col_entries(l), targets.c[l], &x)
        };
        let input = AsfInput { entries, target, scalings, negate_scalings: false, dim: n, mu };
        let value = approx_scaling_factor(
            backend,
            &input,
            &params.delta,
            params.b1,
            params.b2,
            &params.eta,
            ledger,
            rng::mix(t, &[l as u64, rows as u64]),
        )?
        .value;
        if rows {
            x[l] = value;
        } else {
            y[l] = value;
        }
        if with_trace {
            trace.rows.push(trace_row(a, targets, &x, &y, t, ledger));
        }
    }
    Ok((
        ScalingState { x, y, iteration: tau.saturating_sub(1), stopped: StopReason::RandomStop },
        trace,
    ))
}

/// Boosting wrapper around the randomized solver: repeat at constant success
/// probability and certify each attempt with the scaling test.
pub fn run_randomized_boosted(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    backend: &EstimatorBackend,
    epsilon: &Rational,
    p: &Rational,
    ledger: &QueryLedger,
) -> Result<(ScalingState, ConvergenceTrace), SolverError> {
    check_instance(a, targets)?;
    let n = a.dim();
    let mu = a.mu();
    let sigma = targets.sigma();
    let third = Rational::new(1, 3).unwrap();
    let params = derive_params_randomized(n, &mu, &sigma, epsilon, &third)?;
    // ceil(log_3(3/p)) attempts drive the failure probability below p
    let attempts = {
        let inv_p = Real::from_u64(3 * p.denom()) / &Real::from_u64(p.numer());
        ceil_to_u64(&(inv_p.ln() / &Real::from_u64(3).ln()))?.max(1)
    };
    let eta_test = Rational::new(
        p.numer(),
        p.denom().checked_mul(3 * attempts).ok_or(SolverError::ParamOverflow)?,
    )
    .map_err(|_| SolverError::ParamOverflow)?;
    let mut last = None;
    for attempt in 0..attempts {
        let sub = EstimatorBackend::new(
            backend.kind,
            backend.delta,
            backend.eta,
            rng::mix(backend.rng_seed, &[0xb005, attempt]),
        )?;
        let (state, trace) = run_randomized_sinkhorn(a, targets, &sub, &params, ledger, false)?;
        let ok = test_scaling(
            &sub,
            a,
            targets,
            &state.x,
            &state.y,
            &params.delta_prime,
            params.b1,
            params.b2,
            &eta_test,
            mu,
            ledger,
            rng::mix(backend.rng_seed, &[0xce7, attempt]),
        )?;
        if ok {
            return Ok((
                ScalingState { stopped: StopReason::TestPassed, ..state },
                trace,
            ));
        }
        last = Some((state, trace));
    }
    let (state, trace) = last.expect("at least one attempt");
    Ok((ScalingState { stopped: StopReason::Exhausted, ..state }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::BackendKind;
    use crate::fixedpoint::Rational as Q;
    use crate::oracle::marginals_exact;
    use rand::Rng;

    fn q(n: u64, d: u64) -> Q {
        Q::new(n, d).unwrap()
    }

    fn b0() -> SparseMatrix {
        SparseMatrix::from_triples(
            2,
            vec![(0, 0, q(2, 9)), (0, 1, q(4, 9)), (1, 0, q(1, 9)), (1, 1, q(2, 9))],
        )
        .unwrap()
    }

    fn backend(kind: BackendKind, seed: u64) -> EstimatorBackend {
        EstimatorBackend::new(kind, q(1, 16), q(1, 100), seed).unwrap()
    }

    fn divergences(a: &SparseMatrix, t: &TargetMarginals, s: &ScalingState) -> (f64, f64) {
        let xs: Vec<Real> = s.x.iter().map(|v| v.to_real()).collect();
        let ys: Vec<Real> = s.y.iter().map(|v| v.to_real()).collect();
        let (rm, cm) = marginals_exact(a, &xs, &ys);
        let rt: Vec<Real> = t.r.iter().map(|v| v.to_real()).collect();
        let ct: Vec<Real> = t.c.iter().map(|v| v.to_real()).collect();
        (
            diagnostics::relative_entropy(&rt, &rm).to_f64(),
            diagnostics::relative_entropy(&ct, &cm).to_f64(),
        )
    }

    #[test]
    fn derive_full_matches_formulas() {
        // eps = 0.1, mu = 1/16: T = ceil(80 ln 16) + 1 = 223
        let p = derive_params_full(2, &q(1, 16), &Real::from_u64(2).ln(), &q(1, 10)).unwrap();
        assert_eq!(p.t_max, 223);
        assert_eq!(p.delta, q(1, 160));
        assert_eq!(p.delta_prime, q(1, 20));
        assert_eq!(p.b2, 8);
        assert_eq!(p.eta, q(1, 3 * 3 * 223));
        // eps = 1, mu = 1: T = 1
        let p = derive_params_full(2, &Q::one(), &Real::zero(), &Q::one()).unwrap();
        assert_eq!(p.t_max, 1);
    }

    #[test]
    fn full_sinkhorn_scales_gadget() {
        let a = b0();
        let t = TargetMarginals::uniform(2);
        let params = derive_params_full(2, &a.mu(), &t.sigma(), &q(1, 20)).unwrap();
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Exact, 3);
        let (state, trace) =
            run_full_sinkhorn(&a, &t, &b, &params, &ledger, true).unwrap();
        assert_eq!(state.stopped, StopReason::TestPassed);
        let (dr, dc) = divergences(&a, &t, &state);
        assert!(dr <= 0.05 && dc <= 0.05, "D = ({dr}, {dc})");
        assert!(!trace.rows.is_empty());
        assert!(state.iteration <= params.t_max);
    }

    #[test]
    fn uniform_matrix_passes_first_test() {
        let n = 4usize;
        let triples: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j, q(1, 16))))
            .collect();
        let a = SparseMatrix::from_triples(n, triples).unwrap();
        let t = TargetMarginals::uniform(n);
        let params = derive_params_full(n, &a.mu(), &t.sigma(), &q(1, 10)).unwrap();
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 1);
        let (state, _) = run_full_sinkhorn(&a, &t, &b, &params, &ledger, false).unwrap();
        assert_eq!(state.stopped, StopReason::TestPassed);
        assert_eq!(state.iteration, 1);
    }

    fn random_positive(n: usize, seed: u64) -> SparseMatrix {
        let mut rng = crate::rng::stream(seed, &[0xabc]);
        let den = (4 * n * n) as u64;
        let triples: Vec<_> = (0..n)
            .flat_map(|i| {
                let v: Vec<_> = (0..n)
                    .map(|j| (i, j, Q::new(rng.gen_range(1..=4), den).unwrap()))
                    .collect();
                v
            })
            .collect();
        SparseMatrix::from_triples(n, triples).unwrap()
    }

    #[test]
    fn trace_shows_bounded_potential_increase() {
        let a = random_positive(8, 11);
        let t = TargetMarginals::uniform(8);
        let params = derive_params_full(8, &a.mu(), &t.sigma(), &q(1, 10)).unwrap();
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 5);
        let (_, trace) = run_full_sinkhorn(&a, &t, &b, &params, &ledger, true).unwrap();
        let slack = 2.0 * params.delta.to_f64() + 1e-9;
        for w in trace.rows.windows(2) {
            assert!(w[1].potential <= w[0].potential + slack, "potential rose by more than the update slack");
        }
    }

    #[test]
    fn scaling_norm_stays_within_format_bound() {
        let a = random_positive(6, 17);
        let t = TargetMarginals::uniform(6);
        let params = derive_params_full(6, &a.mu(), &t.sigma(), &q(1, 4)).unwrap();
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 2);
        let (state, _) = run_full_sinkhorn(&a, &t, &b, &params, &ledger, false).unwrap();
        let ln_inv_mu = (1.0 / a.mu().to_f64()).ln();
        let sigma = t.sigma().to_f64();
        let bound = state.iteration as f64 * (ln_inv_mu + 1.0 + sigma);
        for v in state.x.iter().chain(state.y.iter()) {
            assert!(v.to_f64().abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn randomized_reaches_target_on_most_seeds() {
        let a = b0();
        let t = TargetMarginals::uniform(2);
        let third = q(1, 3);
        let params =
            derive_params_randomized(2, &a.mu(), &t.sigma(), &q(1, 10), &third).unwrap();
        let mut good = 0;
        let runs = 30;
        for seed in 0..runs {
            let ledger = QueryLedger::new();
            let b = backend(BackendKind::Classical, seed);
            let (state, _) =
                run_randomized_sinkhorn(&a, &t, &b, &params, &ledger, false).unwrap();
            let (dr, dc) = divergences(&a, &t, &state);
            if dr <= 0.1 && dc <= 0.1 {
                good += 1;
            }
        }
        assert!(good * 3 >= runs * 2, "{good}/{runs} runs met the target");
    }

    #[test]
    fn boosted_randomized_certifies() {
        let a = b0();
        let t = TargetMarginals::uniform(2);
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 77);
        let (state, _) =
            run_randomized_boosted(&a, &t, &b, &q(1, 10), &q(1, 10), &ledger).unwrap();
        assert_eq!(state.stopped, StopReason::TestPassed);
        let (dr, dc) = divergences(&a, &t, &state);
        assert!(dr <= 0.1 && dc <= 0.1);
    }

    #[test]
    fn positive_preset_formulas() {
        // eps = 1, mu = nu = 1/(n^2)... use a 2x2 all-1/4 matrix: mu = nu
        let n = 2usize;
        let triples: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j, q(1, 4))))
            .collect();
        let a = SparseMatrix::from_triples(n, triples).unwrap();
        let t = TargetMarginals::uniform(n);
        let p = derive_params_positive(&a, &t, &Q::one()).unwrap();
        // C = 1/64, T = ceil(32 ln 4 + 1 * (1 + 34/64)) = ceil(44.36 + 1.53)
        assert_eq!(p.delta, q(1, 64));
        let c = 1.0 / 64.0;
        let expect = (32.0 * (4.0f64).ln() + 1.0 * (1.0 + 34.0 * c)).ceil() as u64;
        assert_eq!(p.t_max, expect);
        // mu = 1 degenerate case collapses to the log2 term alone
        let one = SparseMatrix::from_triples(1, vec![(0, 0, Q::one())]).unwrap();
        let tu = TargetMarginals::uniform(1);
        let p = derive_params_positive(&one, &tu, &Q::one()).unwrap();
        assert_eq!(p.t_max, 2);
        // non-positive matrices are rejected
        let sparse = b0();
        let holes = SparseMatrix::from_triples(
            2,
            vec![(0, 0, q(1, 4)), (0, 1, q(1, 4)), (1, 0, q(1, 4)), (1, 1, Q::zero())],
        )
        .unwrap();
        assert!(matches!(
            derive_params_positive(&holes, &TargetMarginals::uniform(2), &Q::one()),
            Err(SolverError::NotEntrywisePositive)
        ));
        let _ = sparse;
    }

    #[test]
    fn positive_preset_runs() {
        let a = random_positive(4, 23);
        let t = TargetMarginals::uniform(4);
        let params = derive_params_positive(&a, &t, &q(1, 4)).unwrap();
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 8);
        let (state, _) = run_full_sinkhorn(&a, &t, &b, &params, &ledger, false).unwrap();
        assert_eq!(state.stopped, StopReason::TestPassed);
        let (dr, dc) = divergences(&a, &t, &state);
        assert!(dr <= 0.25 && dc <= 0.25);
    }

    #[test]
    fn sweep_parallelism_is_invisible() {
        let a = random_positive(6, 31);
        let t = TargetMarginals::uniform(6);
        let params = derive_params_full(6, &a.mu(), &t.sigma(), &q(1, 8)).unwrap();
        let run = || {
            let ledger = QueryLedger::new();
            let b = backend(BackendKind::QuantumSim, 42);
            let (state, _) = run_full_sinkhorn(&a, &t, &b, &params, &ledger, false).unwrap();
            (state.x, state.y, state.iteration)
        };
        let baseline = run();
        std::env::set_var("SCALEBAL_THREADS", "4");
        let parallel = run();
        std::env::remove_var("SCALEBAL_THREADS");
        assert_eq!(baseline, parallel);
    }
}
