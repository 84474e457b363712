//! Test-instance generators: the 2x2 gadget pair whose column-scaling gap
//! encodes one hidden bit, permutation-gadget matrices built from them, and
//! random exactly-scalable / balanceable matrices.
//!
//! All generators emit exact rationals with denominators below 2^32.

use num_rational::BigRational;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::fixedpoint::{FixedPoint, Rational};
use crate::oracle::{OracleError, SparseMatrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("bad dimensions: {0}")]
    BadDimensions(&'static str),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("could not satisfy the requested entry floor")]
    FloorUnsatisfiable,
}

fn q(n: u64, d: u64) -> Rational {
    Rational::new(n, d).unwrap()
}

/// The gadget pair: `B0 = [[2/9, 4/9], [1/9, 2/9]]` and `B1` with the same
/// columns in reverse order. Both have entries summing to one and are
/// exactly scalable to uniform marginals; the sign of `y_1 - y_2` in any
/// tight enough scaling reveals which one it is.
pub fn gadget_matrices() -> (SparseMatrix, SparseMatrix) {
    let b0 = SparseMatrix::from_triples(
        2,
        vec![(0, 0, q(2, 9)), (0, 1, q(4, 9)), (1, 0, q(1, 9)), (1, 1, q(2, 9))],
    )
    .unwrap();
    let b1 = SparseMatrix::from_triples(
        2,
        vec![(0, 0, q(4, 9)), (0, 1, q(2, 9)), (1, 0, q(2, 9)), (1, 1, q(1, 9))],
    )
    .unwrap();
    (b0, b1)
}

/// A permutation-gadget instance: `n/2 x n/2` block structure over a hidden
/// block-diagonal permutation `sigma`, with the `(sigma(j), j)` block set to
/// `(2/n) B_{sigma(j) mod 2}` (1-based residue) and all other positions in
/// the same diagonal block listed as explicit zeros, giving `s` potentially
/// non-zero entries per row and column.
#[derive(Debug, Clone)]
pub struct GadgetInstance {
    pub n: usize,
    pub s: usize,
    /// 0-based permutation of `[n/2]`, block-diagonal with blocks of `s/2`.
    pub perm: Vec<usize>,
    pub matrix: SparseMatrix,
    /// Hidden descriptor `z_j = sigma(j) mod 2` with 1-based `sigma` values.
    pub descriptor: Vec<u8>,
}

pub fn build_gadget_instance(n: usize, s: usize, seed: u64) -> Result<GadgetInstance, InstanceError> {
    if s == 0 || s % 8 != 0 {
        return Err(InstanceError::BadDimensions("sparsity must be a positive multiple of 8"));
    }
    if n == 0 || n % s != 0 {
        return Err(InstanceError::BadDimensions("dimension must be a positive multiple of the sparsity"));
    }
    let half = n / 2;
    let block = s / 2;
    let mut perm = vec![0usize; half];
    let mut stream = rng::stream(seed, &[0x6ad6e7]);
    for b in 0..(half / block) {
        let mut local: Vec<usize> = (0..block).collect();
        local.shuffle(&mut stream);
        for (j, &i) in local.iter().enumerate() {
            perm[b * block + j] = b * block + i;
        }
    }
    build_gadget_instance_with_perm(n, s, perm)
}

pub fn build_gadget_instance_with_perm(
    n: usize,
    s: usize,
    perm: Vec<usize>,
) -> Result<GadgetInstance, InstanceError> {
    if s == 0 || s % 8 != 0 {
        return Err(InstanceError::BadDimensions("sparsity must be a positive multiple of 8"));
    }
    if n == 0 || n % s != 0 {
        return Err(InstanceError::BadDimensions("dimension must be a positive multiple of the sparsity"));
    }
    let half = n / 2;
    let block = s / 2;
    if perm.len() != half {
        return Err(InstanceError::BadDimensions("permutation length must be n/2"));
    }
    // must be a permutation respecting the block-diagonal structure
    let mut seen = vec![false; half];
    for (j, &i) in perm.iter().enumerate() {
        if i >= half || seen[i] || i / block != j / block {
            return Err(InstanceError::BadDimensions("not a block-diagonal permutation"));
        }
        seen[i] = true;
    }

    let cell = |z: u8| -> [[Rational; 2]; 2] {
        let scale = |num: u64| q(2 * num, 9 * n as u64);
        if z == 0 {
            [[scale(2), scale(4)], [scale(1), scale(2)]]
        } else {
            [[scale(4), scale(2)], [scale(2), scale(1)]]
        }
    };

    let mut descriptor = Vec::with_capacity(half);
    let mut triples = Vec::with_capacity(n * s);
    for (j, &i) in perm.iter().enumerate() {
        let z = ((i + 1) % 2) as u8; // 1-based residue of sigma(j)
        descriptor.push(z);
        let vals = cell(z);
        let blk = j / block;
        for di in 0..2 {
            for dj in 0..2 {
                triples.push((2 * i + di, 2 * j + dj, vals[di][dj]));
            }
        }
        // explicit zeros at the other block positions of these two rows
        for other in (blk * block)..((blk + 1) * block) {
            if other == j {
                continue;
            }
            for di in 0..2 {
                for dj in 0..2 {
                    triples.push((2 * i + di, 2 * other + dj, Rational::zero()));
                }
            }
        }
    }
    let matrix = SparseMatrix::from_triples(n, triples)?;
    debug_assert_eq!(matrix.mass(), BigRational::one());
    debug_assert!(matrix.row_entries(0).len() <= s);
    Ok(GadgetInstance { n, s, perm, matrix, descriptor })
}

/// Decode the hidden descriptor from column-scaling vectors: block `j` reads
/// `0` when `y_{2j} - y_{2j+1} > 0` and `1` otherwise.
pub fn decode_descriptor(instance: &GadgetInstance, y: &[FixedPoint]) -> Vec<u8> {
    (0..instance.n / 2)
        .map(|j| {
            let gap = y[2 * j].to_dyadic().sub(&y[2 * j + 1].to_dyadic());
            if gap.m > 0.into() {
                0
            } else {
                1
            }
        })
        .collect()
}

/// Number of positions where two descriptors disagree.
pub fn descriptor_errors(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b.iter()).filter(|(x, y)| x != y).count()
}

/// Random exactly-scalable matrix: plants `D S E` where `S` is a rational
/// doubly stochastic matrix supported on the union of `ceil(m/n)` random
/// permutations and `D`, `E` are random positive diagonals, then normalizes
/// the total mass just below one. Every non-zero entry is at least `mu_min`.
pub fn random_scalable(
    n: usize,
    m: usize,
    mu_min: &Rational,
    seed: u64,
) -> Result<SparseMatrix, InstanceError> {
    let k = (m + n - 1) / n.max(1);
    for attempt in 0..64u64 {
        let mut stream = rng::stream(seed, &[0x5ca1ab1e, attempt]);
        let mut counts = std::collections::BTreeMap::<(usize, usize), u64>::new();
        for _ in 0..k.max(1) {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut stream);
            for (i, &j) in p.iter().enumerate() {
                *counts.entry((i, j)).or_insert(0) += 1;
            }
        }
        let u: Vec<u64> = (0..n).map(|_| stream.gen_range(16..32)).collect();
        let v: Vec<u64> = (0..n).map(|_| stream.gen_range(16..32)).collect();
        let total: u64 = counts.iter().map(|(&(i, j), &c)| u[i] * v[j] * c).sum();
        let base = 1024 * k.max(1) as u64;
        let scale = (total + base - 1) / base; // ceil
        let den = base * scale;
        let triples: Vec<_> = counts
            .iter()
            .map(|(&(i, j), &c)| (i, j, Rational::new(u[i] * v[j] * c, den).unwrap()))
            .collect();
        let min_val = triples.iter().map(|&(_, _, v)| v).min().unwrap();
        if &min_val < mu_min {
            continue;
        }
        let a = SparseMatrix::from_triples(n, triples)?;
        debug_assert!(a.total_mass_capped());
        return Ok(a);
    }
    Err(InstanceError::FloorUnsatisfiable)
}

/// Random asymptotically balanceable matrix: zero diagonal, support covered
/// by random cyclic shifts (each a directed cycle cover), unit total mass.
pub fn random_balanceable(
    n: usize,
    m: usize,
    mu_min: &Rational,
    seed: u64,
) -> Result<SparseMatrix, InstanceError> {
    if n < 2 {
        return Err(InstanceError::BadDimensions("balancing needs n >= 2"));
    }
    let k = ((m + n - 1) / n).clamp(1, n - 1);
    for attempt in 0..64u64 {
        let mut stream = rng::stream(seed, &[0xba1a2ce, attempt]);
        let mut shifts: Vec<usize> = (1..n).collect();
        shifts.shuffle(&mut stream);
        shifts.truncate(k);
        let mut raw = Vec::with_capacity(k * n);
        for &d in &shifts {
            for i in 0..n {
                raw.push((i, (i + d) % n, stream.gen_range(16u64..32)));
            }
        }
        let total: u64 = raw.iter().map(|&(_, _, w)| w).sum();
        let triples: Vec<_> =
            raw.into_iter().map(|(i, j, w)| (i, j, Rational::new(w, total).unwrap())).collect();
        let min_val = triples.iter().map(|&(_, _, v)| v).min().unwrap();
        if &min_val < mu_min {
            continue;
        }
        let a = SparseMatrix::from_triples(n, triples)?;
        debug_assert!(a.zero_diagonal());
        return Ok(a);
    }
    Err(InstanceError::FloorUnsatisfiable)
}

/// Random entrywise-positive exactly-scalable matrix (dense): `D S E` with
/// `S` proportional to `4 J + 3 (P_1 + P_2)` for random permutations `P_i`,
/// which keeps all row and column sums of `S` equal.
pub fn random_positive(n: usize, seed: u64) -> Result<SparseMatrix, InstanceError> {
    let mut stream = rng::stream(seed, &[0x90513], );
    let mut s = vec![vec![4u64; n]; n];
    for _ in 0..2 {
        let mut p: Vec<usize> = (0..n).collect();
        p.shuffle(&mut stream);
        for (i, &j) in p.iter().enumerate() {
            s[i][j] += 3;
        }
    }
    let u: Vec<u64> = (0..n).map(|_| stream.gen_range(16..32)).collect();
    let v: Vec<u64> = (0..n).map(|_| stream.gen_range(16..32)).collect();
    let total: u64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| u[i] * v[j] * s[i][j]).sum();
    let base = 1024 * (4 * n as u64 + 6);
    let scale = (total + base - 1) / base;
    let den = base * scale;
    let triples: Vec<_> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, Rational::new(u[i] * v[j] * s[i][j], den).unwrap()))
        .collect();
    Ok(SparseMatrix::from_triples(n, triples)?)
}
