//! Sparse-oracle matrix model with query accounting.
//!
//! A matrix is stored as dual adjacency (row-major and column-major lists of
//! the potentially non-zero entries), so both row and column oracles answer
//! in constant time per query. The public oracle operations follow the
//! black-box model: 1-based indices, with `0` as the out-of-range sentinel
//! for index queries. Internal accessors used by the estimators are 0-based
//! and unmetered; metering for simulated quantum subroutines is charged in
//! bulk to the `quantum_charged_queries` counter instead.
//!
//! Matrix file format (text, 1-based):
//!
//! ```text
//! n m
//! i j num/den      # one line per potentially non-zero entry
//! ```
//!
//! Marginals file: `2n` lines `i num/den`, the first `n` for the row targets,
//! the rest for the column targets.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};

use num_rational::BigRational;
use num_traits::{One, Zero};


use crate::fixedpoint::Rational;
use crate::hp::{self, Real};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("index out of range")]
    OutOfRange,
    #[error("parse error at line {0}: {1}")]
    Parse(usize, String),
    #[error("duplicate entry ({0}, {1})")]
    DuplicateEntry(usize, usize),
    #[error("row or column {0} has no listed entries")]
    EmptyRowOrColumn(usize),
    #[error("entry ({0}, {1}) outside [0, 1]")]
    ValueOutOfRange(usize, usize),
    #[error("total mass exceeds one")]
    MassExceedsOne,
    #[error("matrix has no non-zero entries")]
    ZeroMatrix,
    #[error("target marginals invalid: {0}")]
    BadMarginals(String),
}

/// Cumulative counters for oracle accesses. Monotone; never reset mid-solve.
#[derive(Debug, Default)]
pub struct QueryLedger {
    entry_queries: AtomicU64,
    row_index_queries: AtomicU64,
    col_index_queries: AtomicU64,
    scaling_vector_reads: AtomicU64,
    quantum_charged_queries: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LedgerSnapshot {
    pub entry_queries: u64,
    pub row_index_queries: u64,
    pub col_index_queries: u64,
    pub scaling_vector_reads: u64,
    pub quantum_charged_queries: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            entry_queries: self.entry_queries.load(Ordering::Relaxed),
            row_index_queries: self.row_index_queries.load(Ordering::Relaxed),
            col_index_queries: self.col_index_queries.load(Ordering::Relaxed),
            scaling_vector_reads: self.scaling_vector_reads.load(Ordering::Relaxed),
            quantum_charged_queries: self.quantum_charged_queries.load(Ordering::Relaxed),
        }
    }

    pub fn charge_entries(&self, k: u64) {
        self.entry_queries.fetch_add(k, Ordering::Relaxed);
    }

    pub fn charge_row_index(&self, k: u64) {
        self.row_index_queries.fetch_add(k, Ordering::Relaxed);
    }

    pub fn charge_col_index(&self, k: u64) {
        self.col_index_queries.fetch_add(k, Ordering::Relaxed);
    }

    pub fn charge_scaling_reads(&self, k: u64) {
        self.scaling_vector_reads.fetch_add(k, Ordering::Relaxed);
    }

    pub fn charge_quantum(&self, k: u64) {
        self.quantum_charged_queries.fetch_add(k, Ordering::Relaxed);
    }
}

/// Non-negative rational matrix with per-row and per-column lists of the
/// potentially non-zero entries. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, Rational)>>,
    cols: Vec<Vec<(usize, Rational)>>,
    m: usize,
    mu: Rational,
    total_mass_cap: bool,
}

impl SparseMatrix {
    /// Build from 0-based `(row, col, value)` triples and validate the model
    /// invariants: indices in range, no duplicates, values in `[0, 1]`, every
    /// row and column list non-empty, and at least one non-zero entry.
    pub fn from_triples(
        n: usize,
        triples: impl IntoIterator<Item = (usize, usize, Rational)>,
    ) -> Result<Self, OracleError> {
        let mut rows: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
        let mut cols: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); n];
        let one = Rational::one();
        let mut m = 0usize;
        for (i, j, v) in triples {
            if i >= n || j >= n {
                return Err(OracleError::OutOfRange);
            }
            if v > one {
                return Err(OracleError::ValueOutOfRange(i + 1, j + 1));
            }
            rows[i].push((j, v));
            cols[j].push((i, v));
            m += 1;
        }
        for i in 0..n {
            rows[i].sort_by_key(|e| e.0);
            cols[i].sort_by_key(|e| e.0);
            if rows[i].windows(2).any(|w| w[0].0 == w[1].0) {
                let j = rows[i].windows(2).find(|w| w[0].0 == w[1].0).unwrap()[0].0;
                return Err(OracleError::DuplicateEntry(i + 1, j + 1));
            }
            if rows[i].is_empty() || cols[i].is_empty() {
                return Err(OracleError::EmptyRowOrColumn(i + 1));
            }
        }
        // cross-check the two adjacency structures entry by entry
        let mut row_triples: Vec<(usize, usize, Rational)> = Vec::with_capacity(m);
        let mut col_triples: Vec<(usize, usize, Rational)> = Vec::with_capacity(m);
        for i in 0..n {
            for &(j, v) in &rows[i] {
                row_triples.push((i, j, v));
            }
            for &(r, v) in &cols[i] {
                col_triples.push((r, i, v));
            }
        }
        row_triples.sort_by_key(|t| (t.0, t.1));
        col_triples.sort_by_key(|t| (t.0, t.1));
        debug_assert_eq!(row_triples, col_triples);

        let mut mass = BigRational::zero();
        let mut mu: Option<Rational> = None;
        for &(_, _, v) in &row_triples {
            mass += v.to_big();
            if !v.is_zero() {
                mu = Some(match mu {
                    Some(cur) if cur <= v => cur,
                    _ => v,
                });
            }
        }
        let mu = mu.ok_or(OracleError::ZeroMatrix)?;
        let total_mass_cap = mass <= BigRational::one();
        Ok(SparseMatrix { n, rows, cols, m, mu, total_mass_cap })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Total number of listed (potentially non-zero) entries.
    pub fn nnz(&self) -> usize {
        self.m
    }

    /// Exact lower bound on the non-zero entries.
    pub fn mu(&self) -> Rational {
        self.mu
    }

    /// Whether the total mass is verified to be at most one.
    pub fn total_mass_capped(&self) -> bool {
        self.total_mass_cap
    }

    /// 0-based row list (unmetered; for estimators and evaluators).
    pub fn row_entries(&self, i: usize) -> &[(usize, Rational)] {
        &self.rows[i]
    }

    /// 0-based column list as `(row, value)` pairs.
    pub fn col_entries(&self, j: usize) -> &[(usize, Rational)] {
        &self.cols[j]
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn col_len(&self, j: usize) -> usize {
        self.cols[j].len()
    }

    /// Exact total mass of the unscaled matrix.
    pub fn mass(&self) -> BigRational {
        self.rows.iter().flatten().map(|(_, v)| v.to_big()).sum()
    }

    /// All diagonal entries are absent or exactly zero.
    pub fn zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| {
            self.rows[i]
                .iter()
                .all(|&(j, v)| j != i || v.is_zero())
        })
    }

    /// Every position is listed with a strictly positive value.
    pub fn entrywise_positive(&self) -> bool {
        self.m == self.n * self.n && self.rows.iter().flatten().all(|(_, v)| !v.is_zero())
    }

    /// Largest entry value.
    pub fn max_entry(&self) -> Rational {
        self.rows
            .iter()
            .flatten()
            .map(|&(_, v)| v)
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.m);
        for i in 0..self.n {
            for &(j, v) in &self.rows[i] {
                let _ = writeln!(out, "{} {} {}", i + 1, j + 1, v);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, OracleError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or_else(|| OracleError::Parse(0, "empty file".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| OracleError::Parse(ln + 1, "bad header".into()))?;
        let m: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| OracleError::Parse(ln + 1, "bad header".into()))?;
        let mut triples = Vec::with_capacity(m);
        for (ln, line) in lines {
            let mut parts = line.split_whitespace();
            let i: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| OracleError::Parse(ln + 1, "bad row index".into()))?;
            let j: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| OracleError::Parse(ln + 1, "bad column index".into()))?;
            let v: Rational = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| OracleError::Parse(ln + 1, "bad value".into()))?;
            if i == 0 || j == 0 {
                return Err(OracleError::Parse(ln + 1, "indices are 1-based".into()));
            }
            triples.push((i - 1, j - 1, v));
        }
        if triples.len() != m {
            return Err(OracleError::Parse(0, format!("expected {} entries, found {}", m, triples.len())));
        }
        Self::from_triples(n, triples)
    }
}

/// Metered view over a matrix: the black-box oracle of the model.
pub struct MatrixOracle<'a> {
    pub matrix: &'a SparseMatrix,
    pub ledger: &'a QueryLedger,
}

impl<'a> MatrixOracle<'a> {
    pub fn new(matrix: &'a SparseMatrix, ledger: &'a QueryLedger) -> Self {
        MatrixOracle { matrix, ledger }
    }

    /// Value oracle `O_A`; `i`, `j` are 1-based.
    pub fn query_entry(&self, i: usize, j: usize) -> Result<Rational, OracleError> {
        if i == 0 || j == 0 || i > self.matrix.n || j > self.matrix.n {
            return Err(OracleError::OutOfRange);
        }
        self.ledger.charge_entries(1);
        let row = &self.matrix.rows[i - 1];
        Ok(row
            .binary_search_by_key(&(j - 1), |e| e.0)
            .map(|k| row[k].1)
            .unwrap_or_else(|_| Rational::zero()))
    }

    /// Row index oracle: position of the `k`-th potentially non-zero element
    /// of row `i` (both 1-based), or `0` when `k` exceeds the list length.
    pub fn query_row_index(&self, i: usize, k: usize) -> Result<usize, OracleError> {
        if i == 0 || i > self.matrix.n || k == 0 {
            return Err(OracleError::OutOfRange);
        }
        self.ledger.charge_row_index(1);
        Ok(self.matrix.rows[i - 1].get(k - 1).map(|e| e.0 + 1).unwrap_or(0))
    }

    /// Column index oracle, mirror of [`Self::query_row_index`].
    pub fn query_col_index(&self, j: usize, k: usize) -> Result<usize, OracleError> {
        if j == 0 || j > self.matrix.n || k == 0 {
            return Err(OracleError::OutOfRange);
        }
        self.ledger.charge_col_index(1);
        Ok(self.matrix.cols[j - 1].get(k - 1).map(|e| e.0 + 1).unwrap_or(0))
    }
}

/// `r_l(A(x, y))` for 0-based `l`, evaluated at working precision. Test and
/// trace oracle only; not query metered.
pub fn row_marginal_exact(a: &SparseMatrix, x: &[Real], y: &[Real], l: usize) -> Real {
    let ex = x[l].exp();
    let mut acc = Real::zero();
    for &(j, v) in a.row_entries(l) {
        acc = acc + &(v.to_real() * &y[j].exp());
    }
    acc * &ex
}

/// `c_l(A(x, y))`, mirror of [`row_marginal_exact`].
pub fn col_marginal_exact(a: &SparseMatrix, x: &[Real], y: &[Real], l: usize) -> Real {
    let ey = y[l].exp();
    let mut acc = Real::zero();
    for &(i, v) in a.col_entries(l) {
        acc = acc + &(v.to_real() * &x[i].exp());
    }
    acc * &ey
}

/// Both marginal vectors of `A(x, y)` with the exponentials computed once.
pub fn marginals_exact(a: &SparseMatrix, x: &[Real], y: &[Real]) -> (Vec<Real>, Vec<Real>) {
    let ex: Vec<Real> = x.iter().map(Real::exp).collect();
    let ey: Vec<Real> = y.iter().map(Real::exp).collect();
    let mut r = vec![Real::zero(); a.dim()];
    let mut c = vec![Real::zero(); a.dim()];
    for i in 0..a.dim() {
        for &(j, v) in a.row_entries(i) {
            let w = (v.to_real() * &ex[i]) * &ey[j];
            r[i] = r[i].clone() + &w;
            c[j] = c[j].clone() + &w;
        }
    }
    (r, c)
}

/// Total mass of `A(x, y)`.
pub fn mass_exact(a: &SparseMatrix, x: &[Real], y: &[Real]) -> Real {
    let (r, _) = marginals_exact(a, x, y);
    hp::sum(&r)
}

/// Strictly positive target marginals with unit mass, validated exactly.
#[derive(Debug, Clone)]
pub struct TargetMarginals {
    pub r: Vec<Rational>,
    pub c: Vec<Rational>,
}

impl TargetMarginals {
    pub fn new(r: Vec<Rational>, c: Vec<Rational>) -> Result<Self, OracleError> {
        if r.len() != c.len() {
            return Err(OracleError::BadMarginals("length mismatch".into()));
        }
        for v in r.iter().chain(c.iter()) {
            if v.is_zero() {
                return Err(OracleError::BadMarginals("entries must be positive".into()));
            }
        }
        let sum_r: BigRational = r.iter().map(|v| v.to_big()).sum();
        let sum_c: BigRational = c.iter().map(|v| v.to_big()).sum();
        if !sum_r.is_one() || !sum_c.is_one() {
            return Err(OracleError::BadMarginals("marginals must sum to one".into()));
        }
        Ok(TargetMarginals { r, c })
    }

    pub fn uniform(n: usize) -> Self {
        let v = vec![Rational::new(1, n as u64).unwrap(); n];
        TargetMarginals { r: v.clone(), c: v }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// `max(|ln r_min|, |ln c_min|)`.
    pub fn sigma(&self) -> Real {
        let r_min = self.r.iter().min().unwrap();
        let c_min = self.c.iter().min().unwrap();
        let a = r_min.to_real().ln().abs();
        let b = c_min.to_real().ln().abs();
        a.max(&b)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, v) in self.r.iter().chain(self.c.iter()).enumerate() {
            let _ = writeln!(out, "{} {}", (i % self.r.len()) + 1, v);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, OracleError> {
        let mut values = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let _idx: usize = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| OracleError::Parse(ln + 1, "bad index".into()))?;
            let v: Rational = parts
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| OracleError::Parse(ln + 1, "bad value".into()))?;
            values.push(v);
        }
        if values.len() % 2 != 0 {
            return Err(OracleError::BadMarginals("expected 2n lines".into()));
        }
        let n = values.len() / 2;
        let c = values.split_off(n);
        TargetMarginals::new(values, c)
    }
}
