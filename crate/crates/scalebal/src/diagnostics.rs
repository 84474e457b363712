//! Exact-arithmetic reference metrics: potentials, divergences, and a
//! brute-force potential minimizer for small instances.
//!
//! Everything here evaluates through binary-exact rationals and 192-bit
//! float transcendentals; the `(b1, b2)` fixed-point pipeline is never used.
//! These functions are the measuring stick for the solvers, not part of the
//! query-metered algorithms.

use serde::Serialize;

use crate::hp::{self, Real};
use crate::oracle::{marginals_exact, SparseMatrix, TargetMarginals};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("argument outside domain")]
    DomainError,
}

/// Divergences and potential of a scaling state, at working precision,
/// reported as doubles. Infinite divergences serialize as JSON `null`.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub d_row: f64,
    pub d_col: f64,
    pub l1_row: f64,
    pub l1_col: f64,
    pub potential: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hellinger_rc: Option<f64>,
}

/// `rho(a || b) = b - a + a ln(a/b)` with the conventions `0 ln 0 = 0` and
/// `rho = +inf` for `a > 0, b = 0`.
pub fn rho(a: &Real, b: &Real) -> Real {
    if a.is_zero() {
        return b.clone();
    }
    if b.is_zero() {
        return Real::from_f64(f64::INFINITY);
    }
    let log_term = (a / b).ln();
    (b - a) + &(a * &log_term)
}

/// Relative entropy `D(a || b) = sum_i rho(a_i || b_i)`; `+inf` on support
/// mismatch.
pub fn relative_entropy(a: &[Real], b: &[Real]) -> Real {
    assert_eq!(a.len(), b.len());
    let mut acc = Real::zero();
    for (ai, bi) in a.iter().zip(b.iter()) {
        let r = rho(ai, bi);
        if !r.is_finite() {
            return r;
        }
        acc = acc + &r;
    }
    acc
}

pub fn l1_distance(a: &[Real], b: &[Real]) -> Real {
    let mut acc = Real::zero();
    for (ai, bi) in a.iter().zip(b.iter()) {
        acc = acc + &(ai - bi).abs();
    }
    acc
}

/// Squared unnormalized Hellinger distance `||sqrt(a) - sqrt(b)||_2^2`.
pub fn hellinger_sq(a: &[Real], b: &[Real]) -> Real {
    let mut acc = Real::zero();
    for (ai, bi) in a.iter().zip(b.iter()) {
        let d = ai.sqrt() - &bi.sqrt();
        acc = acc + &(&d * &d);
    }
    acc
}

/// `w(beta) = beta - ln(1 + beta)` for `beta > -1`; the lower-bound function
/// of the generalized Pinsker inequality.
pub fn pinsker_w(beta: &Real) -> Result<Real, DiagnosticsError> {
    let one = Real::one();
    let shifted = &one + beta;
    if shifted <= Real::zero() {
        return Err(DiagnosticsError::DomainError);
    }
    Ok(beta - &shifted.ln())
}

/// Scaling potential `f(x, y) = sum A_ij e^{x_i + y_j} - <r, x> - <c, y>`.
pub fn potential_scaling(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    x: &[Real],
    y: &[Real],
) -> Real {
    let (r_marg, _) = marginals_exact(a, x, y);
    let mut acc = hp::sum(&r_marg);
    for (ri, xi) in targets.r.iter().zip(x.iter()) {
        acc = acc - &(ri.to_real() * xi);
    }
    for (ci, yi) in targets.c.iter().zip(y.iter()) {
        acc = acc - &(ci.to_real() * yi);
    }
    acc
}

/// Balancing potential `f(x) = ||A(x)||_1` where `A(x) = A(x, -x)`.
pub fn potential_balancing(a: &SparseMatrix, x: &[Real]) -> Real {
    let neg: Vec<Real> = x.iter().map(|v| -v).collect();
    let (r, _) = marginals_exact(a, x, &neg);
    hp::sum(&r)
}

/// Balancing residual `||r(A(x)) - c(A(x))||_1 / ||A(x)||_1`.
pub fn balance_residual(a: &SparseMatrix, x: &[Real]) -> Real {
    let neg: Vec<Real> = x.iter().map(|v| -v).collect();
    let (r, c) = marginals_exact(a, x, &neg);
    let mass = hp::sum(&r);
    l1_distance(&r, &c) / &mass
}

/// Full metric report for a scaling state.
pub fn metric_report(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    x: &[Real],
    y: &[Real],
) -> MetricReport {
    let (r_marg, c_marg) = marginals_exact(a, x, y);
    let r_t: Vec<Real> = targets.r.iter().map(|v| v.to_real()).collect();
    let c_t: Vec<Real> = targets.c.iter().map(|v| v.to_real()).collect();
    MetricReport {
        d_row: relative_entropy(&r_t, &r_marg).to_f64(),
        d_col: relative_entropy(&c_t, &c_marg).to_f64(),
        l1_row: l1_distance(&r_t, &r_marg).to_f64(),
        l1_col: l1_distance(&c_t, &c_marg).to_f64(),
        potential: potential_scaling(a, targets, x, y).to_f64(),
        hellinger_rc: None,
    }
}

/// Exact Sinkhorn row update `x_l = ln(r_l / sum_j A_lj e^{y_j})`.
pub fn exact_row_update(a: &SparseMatrix, targets: &TargetMarginals, y: &[Real]) -> Vec<Real> {
    (0..a.dim())
        .map(|l| {
            let mut denom = Real::zero();
            for &(j, v) in a.row_entries(l) {
                denom = denom + &(v.to_real() * &y[j].exp());
            }
            targets.r[l].to_real().ln() - &denom.ln()
        })
        .collect()
}

/// Exact Sinkhorn column update, mirror of [`exact_row_update`].
pub fn exact_col_update(a: &SparseMatrix, targets: &TargetMarginals, x: &[Real]) -> Vec<Real> {
    (0..a.dim())
        .map(|l| {
            let mut denom = Real::zero();
            for &(i, v) in a.col_entries(l) {
                denom = denom + &(x[i].exp() * &v.to_real());
            }
            targets.c[l].to_real().ln() - &denom.ln()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct DescentConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Scaling vectors beyond this infinity norm flag the instance unbounded.
    pub divergence_bound: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig { max_iters: 200_000, grad_tol: 1e-10, divergence_bound: 60.0 }
    }
}

#[derive(Debug, Clone)]
pub enum PotentialMin {
    /// Infimum estimate, evaluated at working precision at the minimizer.
    Minimum(Real),
    /// The potential kept decreasing along diverging scalings.
    Unbounded,
}

/// Estimate `inf f` by gradient descent with backtracking line search.
///
/// The search runs in double precision (the potential is convex and smooth,
/// and the gradient is the marginal residual); the returned value is then
/// re-evaluated at working precision at the final iterate, so it upper
/// bounds the true infimum.
pub fn brute_force_potential_min(
    a: &SparseMatrix,
    targets: &TargetMarginals,
    cfg: DescentConfig,
) -> PotentialMin {
    let n = a.dim();
    let entries: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| a.row_entries(i).iter().map(move |&(j, v)| (i, j, v.to_f64())))
        .collect();
    let r: Vec<f64> = targets.r.iter().map(|v| v.to_f64()).collect();
    let c: Vec<f64> = targets.c.iter().map(|v| v.to_f64()).collect();

    let f = |x: &[f64], y: &[f64]| -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &entries {
            acc += v * (x[i] + y[j]).exp();
        }
        for i in 0..n {
            acc -= r[i] * x[i] + c[i] * y[i];
        }
        acc
    };
    let grad = |x: &[f64], y: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let mut gr = vec![0.0; n];
        let mut gc = vec![0.0; n];
        for &(i, j, v) in &entries {
            let w = v * (x[i] + y[j]).exp();
            gr[i] += w;
            gc[j] += w;
        }
        for i in 0..n {
            gr[i] -= r[i];
            gc[i] -= c[i];
        }
        (gr, gc)
    };

    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    let mut fv = f(&x, &y);
    for _ in 0..cfg.max_iters {
        let (gx, gy) = grad(&x, &y);
        let gnorm2: f64 = gx.iter().chain(gy.iter()).map(|g| g * g).sum();
        if gnorm2.sqrt() <= cfg.grad_tol {
            break;
        }
        let sup = x
            .iter()
            .chain(y.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > cfg.divergence_bound {
            return PotentialMin::Unbounded;
        }
        // backtracking line search on the Armijo condition
        let mut step = 1.0f64;
        loop {
            let xn: Vec<f64> = x.iter().zip(&gx).map(|(v, g)| v - step * g).collect();
            let yn: Vec<f64> = y.iter().zip(&gy).map(|(v, g)| v - step * g).collect();
            let fn_ = f(&xn, &yn);
            if fn_ <= fv - 0.5 * step * gnorm2 || step < 1e-18 {
                x = xn;
                y = yn;
                fv = fn_;
                break;
            }
            step *= 0.5;
        }
    }
    let xr: Vec<Real> = x.iter().map(|&v| Real::from_f64(v)).collect();
    let yr: Vec<Real> = y.iter().map(|&v| Real::from_f64(v)).collect();
    PotentialMin::Minimum(potential_scaling(a, targets, &xr, &yr))
}
