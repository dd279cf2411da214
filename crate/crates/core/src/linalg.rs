//! Small vector helpers, a sparse LU wrapper, Gauss–Legendre rules and
//! Halton sequences.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// Orthonormal basis of the complement of the unit vector `n`.
pub fn orthonormal_complement(n: &[f64]) -> Vec<Vec<f64>> {
    let dim = n.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dim.saturating_sub(1));
    // Start from the coordinate axes least aligned with n.
    let mut axes: Vec<usize> = (0..dim).collect();
    axes.sort_by(|&i, &j| n[i].abs().partial_cmp(&n[j].abs()).unwrap());
    for &k in &axes {
        if basis.len() + 1 == dim {
            break;
        }
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        let p = dot(&v, n);
        for (vi, ni) in v.iter_mut().zip(n) {
            *vi -= p * ni;
        }
        for b in &basis {
            let q = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= q * bi;
            }
        }
        let len = norm(&v);
        if len > 1e-8 {
            basis.push(scale(&v, 1.0 / len));
        }
    }
    basis
}

/// Determinant of a small dense matrix.
pub fn det(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 1.0,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().determinant(),
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 0 { 1.0 } else if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Solves the sparse system given by `(row, col, value)` triplets with a
/// sparse LU factorisation (duplicates are summed).
pub fn sparse_solve(n: usize, triplets: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let trip: Vec<Triplet<usize, usize, f64>> = triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let out: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("non-finite solution".into()));
    }
    Ok(out)
}

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// The `i`-th point (1-based index internally) of the Halton sequence in `[0,1)^dim`.
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| radical_inverse(i as u64 + 1, PRIMES[k]))
        .collect()
}
