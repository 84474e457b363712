//! Randomized Osborne balancing with finite-precision updates.
//!
//! Each iteration picks a uniformly random index `l` and replaces `x_l` so
//! that the `l`-th row and column sums of `A(x) = (A_ij e^{x_i - x_j})`
//! approximately agree; the ideal update is
//! `x_l + ln sqrt(c_l(A(x)) / r_l(A(x)))`, assembled here from two
//! scaling-factor queries with unit target. The returned state is the one
//! after a uniformly random stopping iteration.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use crate::diagnostics;
use crate::estimators::{
    approx_scaling_factor, estimate_total_mass, AsfInput, EstimatorBackend,
};
use crate::fixedpoint::{ceil_log2_rational, FixedPoint, FpFormat, Rational};
use crate::hp::Real;
use crate::oracle::{QueryLedger, SparseMatrix};
use crate::rng;
use crate::sinkhorn::SolverError;

/// Balancing schedule: `T = ceil(12 n ln(||A||_1/mu) / (p eps^2))`,
/// `delta = p eps^2 / 24`, `eta = p eps^2 / (12 n T)`,
/// `b1 = ceil(log2(sigma + T (ln(||A||_1/mu)/2 + 1)))`,
/// `b2 = ceil(log2(1/delta))`.
#[derive(Debug, Clone)]
pub struct OsborneParams {
    pub t_max: u64,
    pub delta: Rational,
    pub eta: Rational,
    pub b1: u32,
    pub b2: u32,
    pub epsilon: Rational,
    pub p: Rational,
}

#[derive(Debug, Clone)]
pub struct BalancingState {
    pub x: Vec<FixedPoint>,
    pub iteration: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BalanceTraceRow {
    pub t: u64,
    pub potential: f64,
    pub residual: f64,
    pub classical_queries: u64,
    pub quantum_queries: u64,
}

/// `max_l { |ln r_l(A)|, |ln c_l(A)| }` of the unscaled matrix.
pub fn marginal_log_spread(a: &SparseMatrix) -> Real {
    let mut sigma = Real::zero();
    for l in 0..a.dim() {
        let r: BigRational = a.row_entries(l).iter().map(|(_, v)| v.to_big()).sum();
        let c: BigRational = a.col_entries(l).iter().map(|(_, v)| v.to_big()).sum();
        for m in [r, c] {
            let lm = Real::from_big_rational(&m).ln().abs();
            sigma = sigma.max(&lm);
        }
    }
    sigma
}

pub fn derive_params_osborne(
    a: &SparseMatrix,
    epsilon: &Rational,
    p: &Rational,
) -> Result<OsborneParams, SolverError> {
    if epsilon.is_zero() || epsilon > &Rational::one() {
        return Err(SolverError::BadInstance("epsilon outside (0, 1]"));
    }
    if p.is_zero() || p > &Rational::one() {
        return Err(SolverError::BadInstance("p outside (0, 1]"));
    }
    let n = a.dim() as u64;
    let mass = a.mass();
    let ratio = mass / a.mu().to_big();
    let ln_ratio = Real::from_big_rational(&ratio).ln();
    // T = ceil(12 n ln(ratio) / (p eps^2))
    let num = 12u64
        .checked_mul(n)
        .and_then(|v| v.checked_mul(p.denom()))
        .and_then(|v| v.checked_mul(epsilon.denom()))
        .and_then(|v| v.checked_mul(epsilon.denom()))
        .ok_or(SolverError::ParamOverflow)?;
    let den = p
        .numer()
        .checked_mul(epsilon.numer())
        .and_then(|v| v.checked_mul(epsilon.numer()))
        .ok_or(SolverError::ParamOverflow)?;
    let factor = Real::from_u64(num) / &Real::from_u64(den);
    let t = {
        let v = (factor * &ln_ratio).ceil_bigint().max(BigInt::from(0));
        v.to_u64().ok_or(SolverError::ParamOverflow)?.max(1)
    };
    // delta = p eps^2 / 24
    let d_num = p
        .numer()
        .checked_mul(epsilon.numer())
        .and_then(|v| v.checked_mul(epsilon.numer()))
        .ok_or(SolverError::ParamOverflow)?;
    let d_den = p
        .denom()
        .checked_mul(epsilon.denom())
        .and_then(|v| v.checked_mul(epsilon.denom()))
        .and_then(|v| v.checked_mul(24))
        .ok_or(SolverError::ParamOverflow)?;
    let delta = Rational::new(d_num, d_den).map_err(|_| SolverError::ParamOverflow)?;
    // eta = p eps^2 / (12 n T) = 2 delta / (n T)
    let e_den = d_den
        .checked_div(24)
        .and_then(|v| v.checked_mul(12))
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(t))
        .ok_or(SolverError::ParamOverflow)?;
    let eta = Rational::new(d_num, e_den).map_err(|_| SolverError::ParamOverflow)?;
    let inv_delta = BigRational::new(BigInt::from(delta.denom()), BigInt::from(delta.numer()));
    let b2 = ceil_log2_rational(&inv_delta).max(0) as u32;
    let sigma = marginal_log_spread(a);
    let growth = Real::from_u64(t) * &(ln_ratio.mul_pow2(-1) + &Real::one());
    let b1 = {
        let v = (&sigma + &growth).ln() / &Real::from_u64(2).ln();
        v.ceil_bigint().max(BigInt::from(0)).to_u64().ok_or(SolverError::ParamOverflow)? as u32
    };
    Ok(OsborneParams { t_max: t, delta, eta, b1, b2, epsilon: *epsilon, p: *p })
}

fn check_balancing_instance(a: &SparseMatrix) -> Result<(), SolverError> {
    if !a.zero_diagonal() {
        return Err(SolverError::BadInstance("balancing requires a zero diagonal"));
    }
    Ok(())
}

/// Incrementally maintained marginals of `A(x)` for cheap per-iteration
/// tracing: an Osborne update touches one coordinate, so only the affected
/// row and column sums change. Fully recomputed periodically to shed any
/// accumulated rounding drift.
struct BalanceMonitor {
    exp: Vec<Real>,
    row: Vec<Real>,
    col: Vec<Real>,
    updates: u64,
}

impl BalanceMonitor {
    fn new(a: &SparseMatrix, x: &[FixedPoint]) -> Self {
        let exp: Vec<Real> = x.iter().map(|v| v.to_real().exp()).collect();
        let mut m = BalanceMonitor { exp, row: Vec::new(), col: Vec::new(), updates: 0 };
        m.recompute(a);
        m
    }

    fn recompute(&mut self, a: &SparseMatrix) {
        let n = a.dim();
        let mut row = vec![Real::zero(); n];
        let mut col = vec![Real::zero(); n];
        for i in 0..n {
            for &(j, v) in a.row_entries(i) {
                let w = (v.to_real() * &self.exp[i]) / &self.exp[j];
                row[i] = row[i].clone() + &w;
                col[j] = col[j].clone() + &w;
            }
        }
        self.row = row;
        self.col = col;
    }

    fn update(&mut self, a: &SparseMatrix, l: usize, new_xl: &FixedPoint) {
        let new_exp = new_xl.to_real().exp();
        let old_exp = self.exp[l].clone();
        for &(j, v) in a.row_entries(l) {
            let old_w = (v.to_real() * &old_exp) / &self.exp[j];
            let new_w = (v.to_real() * &new_exp) / &self.exp[j];
            let d = new_w - &old_w;
            self.row[l] = self.row[l].clone() + &d;
            self.col[j] = self.col[j].clone() + &d;
        }
        for &(i, v) in a.col_entries(l) {
            let old_w = (v.to_real() * &self.exp[i]) / &old_exp;
            let new_w = (v.to_real() * &self.exp[i]) / &new_exp;
            let d = new_w - &old_w;
            self.row[i] = self.row[i].clone() + &d;
            self.col[l] = self.col[l].clone() + &d;
        }
        self.exp[l] = new_exp;
        self.updates += 1;
        if self.updates % 4096 == 0 {
            self.recompute(a);
        }
    }

    fn potential(&self) -> Real {
        crate::hp::sum(&self.row)
    }

    fn residual(&self) -> Real {
        diagnostics::l1_distance(&self.row, &self.col) / &self.potential()
    }
}

/// Random Osborne: returns the scaling vector after a uniformly random
/// stopping iteration `tau in [T]`. With the derived parameters the result
/// is `eps`-balanced in normalized l1 with probability at least `1 - p`.
pub fn run_random_osborne(
    a: &SparseMatrix,
    backend: &EstimatorBackend,
    params: &OsborneParams,
    ledger: &QueryLedger,
    with_trace: bool,
) -> Result<(BalancingState, Vec<BalanceTraceRow>), SolverError> {
    check_balancing_instance(a)?;
    let n = a.dim();
    let fmt = FpFormat::new(params.b1, params.b2);
    let mu = a.mu();
    let mut x = vec![FixedPoint::zero(fmt); n];
    let mut trace = Vec::new();
    let mut monitor = if with_trace { Some(BalanceMonitor::new(a, &x)) } else { None };
    let eta_half = Rational::new(params.eta.numer(), params.eta.denom() * 2)
        .map_err(|_| SolverError::ParamOverflow)?;

    let tau: u64 = rng::stream(backend.rng_seed, &[0x05b0]).gen_range(1..=params.t_max);
    for t in 1..=tau {
        let l: usize = rng::stream(backend.rng_seed, &[0x1d8, t]).gen_range(0..n);
        // ln(1 / sum_j A_lj e^{-x_j})
        let row_input = AsfInput {
            entries: a.row_entries(l),
            target: Rational::one(),
            scalings: &x,
            negate_scalings: true,
            dim: n,
            mu,
        };
        let row_est = approx_scaling_factor(
            backend, &row_input, &params.delta, params.b1, params.b2, &eta_half, ledger,
            rng::mix(t, &[l as u64, 0]),
        )?;
        // ln(1 / sum_i A_il e^{x_i})
        let col_input = AsfInput {
            entries: a.col_entries(l),
            target: Rational::one(),
            scalings: &x,
            negate_scalings: false,
            dim: n,
            mu,
        };
        let col_est = approx_scaling_factor(
            backend, &col_input, &params.delta, params.b1, params.b2, &eta_half, ledger,
            rng::mix(t, &[l as u64, 1]),
        )?;
        let half_diff = {
            let d = row_est.value.to_dyadic().sub(&col_est.value.to_dyadic());
            crate::fixedpoint::Dyadic { m: d.m, bits: d.bits + 1 }
        };
        let new_xl = half_diff.encode_saturating(fmt);
        if let Some(m) = monitor.as_mut() {
            m.update(a, l, &new_xl);
        }
        x[l] = new_xl;

        if let Some(m) = monitor.as_ref() {
            let snap = ledger.snapshot();
            trace.push(BalanceTraceRow {
                t,
                potential: m.potential().to_f64(),
                residual: m.residual().to_f64(),
                classical_queries: snap.entry_queries,
                quantum_queries: snap.quantum_charged_queries,
            });
        }
    }
    Ok((BalancingState { x, iteration: tau }, trace))
}

/// Exact balance check: residual `||r(A(x)) - c(A(x))||_1 / ||A(x)||_1`
/// evaluated at working precision, and whether it is at most `eps`.
pub fn check_balanced(a: &SparseMatrix, x: &[Real], epsilon: &Rational) -> (bool, Real) {
    let residual = diagnostics::balance_residual(a, x);
    let ok = residual <= epsilon.to_real();
    (ok, residual)
}

/// Estimated balance test over the oracle model: `true` certifies the
/// residual is below `eps` and `false` certifies it is above `eps / 2`, with
/// probability `1 - eta`. Costs `2n` scaling-factor calls and one mass
/// estimate.
pub fn test_balanced_estimated(
    backend: &EstimatorBackend,
    a: &SparseMatrix,
    x: &[FixedPoint],
    b1: u32,
    b2: u32,
    epsilon: &Rational,
    eta: &Rational,
    ledger: &QueryLedger,
    tag: u64,
) -> Result<bool, SolverError> {
    let n = a.dim();
    let mu = a.mu();
    let delta = Rational::new(epsilon.numer(), epsilon.denom().checked_mul(16).ok_or(SolverError::ParamOverflow)?)
        .map_err(|_| SolverError::ParamOverflow)?;
    let eta_share = Rational::new(
        eta.numer(),
        eta.denom().checked_mul(2 * n as u64 + 1).ok_or(SolverError::ParamOverflow)?,
    )
    .map_err(|_| SolverError::ParamOverflow)?;
    let b2_eff = b2.max(ceil_log2_rational(&BigRational::new(
        BigInt::from(delta.denom()),
        BigInt::from(delta.numer()),
    )) as u32);

    let neg_x: Vec<FixedPoint> = x.iter().map(|v| v.neg()).collect();
    let mass = estimate_total_mass(backend, a, x, &neg_x, &delta, &eta_share, ledger, rng::mix(tag, &[0]))?;
    let mass_q = mass.value.to_rational();

    let mut l1 = BigRational::from_integer(0.into());
    for l in 0..n {
        let row_input = AsfInput {
            entries: a.row_entries(l),
            target: Rational::one(),
            scalings: x,
            negate_scalings: true,
            dim: n,
            mu,
        };
        let row_est = approx_scaling_factor(
            backend, &row_input, &delta, b1, b2_eff, &eta_share, ledger, rng::mix(tag, &[1, l as u64]),
        )?;
        let col_input = AsfInput {
            entries: a.col_entries(l),
            target: Rational::one(),
            scalings: x,
            negate_scalings: false,
            dim: n,
            mu,
        };
        let col_est = approx_scaling_factor(
            backend, &col_input, &delta, b1, b2_eff, &eta_share, ledger, rng::mix(tag, &[2, l as u64]),
        )?;
        // r_l = e^{x_l - row_est}, c_l = e^{-x_l - col_est}
        let log_r = x[l].to_dyadic().sub(&row_est.value.to_dyadic());
        let log_c = x[l].to_dyadic().neg().sub(&col_est.value.to_dyadic());
        let r_hat = exp_log_marginal(&log_r, &delta)?;
        let c_hat = exp_log_marginal(&log_c, &delta)?;
        let d = r_hat.to_rational() - c_hat.to_rational();
        l1 += if d < BigRational::from_integer(0.into()) { -d } else { d };
    }
    let threshold = epsilon.to_big() * BigRational::new(3.into(), 4.into()) * mass_q;
    Ok(l1 <= threshold)
}

fn exp_log_marginal(
    log_v: &crate::fixedpoint::Dyadic,
    delta: &Rational,
) -> Result<FixedPoint, SolverError> {
    let inv_delta = BigRational::new(BigInt::from(delta.denom()), BigInt::from(delta.numer()));
    let base = ceil_log2_rational(&inv_delta).max(1) as u32 + 6;
    let extra = if log_v.m < BigInt::from(0) {
        (log_v.to_real().abs().to_f64() * std::f64::consts::LOG2_E).ceil() as u32 + 2
    } else {
        0
    };
    crate::fixedpoint::exp_dyadic(log_v, FpFormat::new(8, base + extra))
        .map_err(|e| SolverError::Estimator(e.into()))
}

/// Boosting wrapper: repeated constant-probability runs, each certified by
/// the estimated balance test.
pub fn run_osborne_boosted(
    a: &SparseMatrix,
    backend: &EstimatorBackend,
    epsilon: &Rational,
    p: &Rational,
    ledger: &QueryLedger,
) -> Result<(BalancingState, bool), SolverError> {
    let third = Rational::new(1, 3).unwrap();
    // certify against eps while running the solver at eps/2, so that a
    // passing test implies the target and a typical success passes the test
    let half_eps = Rational::new(epsilon.numer(), epsilon.denom() * 2)
        .map_err(|_| SolverError::ParamOverflow)?;
    let params = derive_params_osborne(a, &half_eps, &third)?;
    let attempts = {
        let inv_p = Real::from_u64(3 * p.denom()) / &Real::from_u64(p.numer());
        (inv_p.ln() / &Real::from_u64(3).ln())
            .ceil_bigint()
            .max(BigInt::from(1))
            .to_u64()
            .ok_or(SolverError::ParamOverflow)?
    };
    let eta_test = Rational::new(p.numer(), p.denom().checked_mul(3 * attempts).ok_or(SolverError::ParamOverflow)?)
        .map_err(|_| SolverError::ParamOverflow)?;
    let mut last = None;
    for attempt in 0..attempts {
        let sub = EstimatorBackend::new(
            backend.kind,
            backend.delta,
            backend.eta,
            rng::mix(backend.rng_seed, &[0x0b00, attempt]),
        )
        .map_err(SolverError::Estimator)?;
        let (state, _) = run_random_osborne(a, &sub, &params, ledger, false)?;
        let ok = test_balanced_estimated(
            &sub, a, &state.x, params.b1, params.b2, epsilon, &eta_test, ledger,
            rng::mix(backend.rng_seed, &[0xcafe, attempt]),
        )?;
        if ok {
            return Ok((state, true));
        }
        last = Some(state);
    }
    Ok((last.expect("at least one attempt"), false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::BackendKind;
    use crate::fixedpoint::Rational as Q;
    use rand::Rng;

    fn q(n: u64, d: u64) -> Q {
        Q::new(n, d).unwrap()
    }

    fn backend(kind: BackendKind, seed: u64) -> EstimatorBackend {
        EstimatorBackend::new(kind, q(1, 16), q(1, 100), seed).unwrap()
    }

    /// Cycle-cover supported balanceable matrix with random entries.
    fn random_balanceable(n: usize, shifts: &[usize], seed: u64) -> SparseMatrix {
        let mut rng = crate::rng::stream(seed, &[0xba1]);
        let mut raw = Vec::new();
        for &d in shifts {
            for i in 0..n {
                raw.push((i, (i + d) % n, rng.gen_range(16u64..32)));
            }
        }
        let total: u64 = raw.iter().map(|&(_, _, w)| w).sum();
        let triples: Vec<_> = raw.into_iter().map(|(i, j, w)| (i, j, Q::new(w, total).unwrap())).collect();
        SparseMatrix::from_triples(n, triples).unwrap()
    }

    #[test]
    fn two_by_two_single_update_balances() {
        // A = [[0, 1/4], [1/2, 0]]: the exact update at l = 0 gives
        // x_0 - x_1 = ln sqrt(b/a) = ln(sqrt 2)
        let a = SparseMatrix::from_triples(2, vec![(0, 1, q(1, 4)), (1, 0, q(1, 2))]).unwrap();
        let params = derive_params_osborne(&a, &q(1, 4), &q(1, 3)).unwrap();
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Exact, 2);
        // run a long-enough prefix that index 0 or 1 was hit at least once
        let (state, _) = run_random_osborne(&a, &b, &params, &ledger, false).unwrap();
        let xs: Vec<Real> = state.x.iter().map(|v| v.to_real()).collect();
        let (_, residual) = check_balanced(&a, &xs, &q(1, 4));
        // after any single exact update the matrix is exactly balanced
        if state.iteration >= 1 {
            assert!(residual.to_f64() < 1e-3, "residual {}", residual.to_f64());
        }
    }

    #[test]
    fn symmetric_matrix_already_balanced() {
        let a = SparseMatrix::from_triples(2, vec![(0, 1, q(1, 4)), (1, 0, q(1, 4))]).unwrap();
        let xs = vec![Real::zero(), Real::zero()];
        let (ok, residual) = check_balanced(&a, &xs, &Q::one());
        assert!(ok);
        assert!(residual.to_f64().abs() < 1e-30);
    }

    #[test]
    fn residual_of_unbalanced_matrix() {
        // x = 0 on [[0, 1/2], [1/4, 0]]: residual = 2 |1/2 - 1/4| / (3/4) = 2/3
        let a = SparseMatrix::from_triples(2, vec![(0, 1, q(1, 2)), (1, 0, q(1, 4))]).unwrap();
        let xs = vec![Real::zero(), Real::zero()];
        let (_, residual) = check_balanced(&a, &xs, &q(1, 10));
        assert!((residual.to_f64() - 2.0 / 3.0).abs() < 1e-30);
        let (ok, _) = check_balanced(&a, &xs, &Q::one());
        assert!(ok, "residual <= 1 accepts at eps = 1");
    }

    #[test]
    fn iteration_budget_matches_formula() {
        // n = 8, ||A||_1 / mu = 16, eps = 1/10, p = 1/3:
        // T = ceil(96 ln(16) * 300) = 79851
        let mut triples = Vec::new();
        for i in 0..8usize {
            triples.push((i, (i + 1) % 8, q(1, 16)));
            triples.push((i, (i + 2) % 8, q(1, 16)));
        }
        let a = SparseMatrix::from_triples(8, triples).unwrap();
        assert_eq!(a.mass(), num_rational::BigRational::from_integer(1.into()));
        let params = derive_params_osborne(&a, &q(1, 10), &q(1, 3)).unwrap();
        assert_eq!(params.t_max, 79_851);
        assert_eq!(params.delta, q(1, 7200));
        assert_eq!(params.b2, 13);
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let a = SparseMatrix::from_triples(2, vec![(0, 0, q(1, 4)), (0, 1, q(1, 4)), (1, 0, q(1, 4))])
            .unwrap();
        let params = OsborneParams {
            t_max: 1,
            delta: q(1, 24),
            eta: q(1, 100),
            b1: 6,
            b2: 8,
            epsilon: q(1, 4),
            p: q(1, 3),
        };
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 1);
        assert!(matches!(
            run_random_osborne(&a, &b, &params, &ledger, false),
            Err(SolverError::BadInstance(_))
        ));
    }

    #[test]
    fn progress_and_floor_along_a_run() {
        let a = random_balanceable(6, &[1, 2, 4], 9);
        let mut params = derive_params_osborne(&a, &q(1, 2), &q(1, 2)).unwrap();
        params.t_max = params.t_max.min(400);
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 31);
        let (_, trace) = run_random_osborne(&a, &b, &params, &ledger, true).unwrap();
        let mu = a.mu().to_f64();
        for row in &trace {
            assert!(row.potential >= mu - 1e-12, "potential under the floor at t = {}", row.t);
        }
    }

    #[test]
    fn norm_growth_bound_holds() {
        let a = random_balanceable(5, &[1, 3], 13);
        let mut params = derive_params_osborne(&a, &q(1, 2), &q(1, 2)).unwrap();
        params.t_max = params.t_max.min(300);
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 8);
        let (state, _) = run_random_osborne(&a, &b, &params, &ledger, false).unwrap();
        let mass: f64 = a.mass().to_f64().unwrap_or(1.0);
        let bound = state.iteration as f64
            * (0.5 * (mass / a.mu().to_f64()).ln() + params.delta.to_f64());
        for v in &state.x {
            assert!(v.to_f64().abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn monte_carlo_balances_most_runs() {
        let a = random_balanceable(4, &[1, 2], 3);
        let eps = q(1, 2);
        let params = derive_params_osborne(&a, &eps, &q(1, 3)).unwrap();
        let runs = 20;
        let mut good = 0;
        for seed in 0..runs {
            let ledger = QueryLedger::new();
            let b = backend(BackendKind::Classical, seed);
            let (state, _) = run_random_osborne(&a, &b, &params, &ledger, false).unwrap();
            let xs: Vec<Real> = state.x.iter().map(|v| v.to_real()).collect();
            if check_balanced(&a, &xs, &eps).0 {
                good += 1;
            }
        }
        assert!(good * 3 >= runs * 2, "{good}/{runs}");
    }

    #[test]
    fn boosted_run_certifies() {
        let a = random_balanceable(4, &[1, 2], 5);
        let ledger = QueryLedger::new();
        let b = backend(BackendKind::Classical, 12);
        let (state, certified) = run_osborne_boosted(&a, &b, &q(1, 2), &q(1, 10), &ledger).unwrap();
        assert!(certified);
        let xs: Vec<Real> = state.x.iter().map(|v| v.to_real()).collect();
        let (ok, _) = check_balanced(&a, &xs, &q(1, 2));
        assert!(ok);
    }
}
