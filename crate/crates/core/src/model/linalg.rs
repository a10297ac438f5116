//! Small dense helpers for transition matrices: reachability, period,
//! stationary vectors and the Perron eigenproblem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Convergence threshold on successive power iterates (sup norm).
pub const POWER_TOL: f64 = 1e-14;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 1_000_000;

fn reachable(n: usize, start: usize, edge: &dyn Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen
}

/// Strong connectivity of the directed graph `i -> j` iff `edge(i, j)`.
pub fn is_irreducible(n: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    if n == 0 {
        return false;
    }
    let fwd = reachable(n, 0, &edge);
    let bwd = reachable(n, 0, &|i, j| edge(j, i));
    fwd.iter().all(|&b| b) && bwd.iter().all(|&b| b)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible graph: gcd over edges of `level(i) + 1 - level(j)`
/// for BFS levels from node 0.
pub fn period(n: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if edge(i, j) && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0;
    for i in 0..n {
        for j in 0..n {
            if edge(i, j) && level[i] != usize::MAX && level[j] != usize::MAX {
                let diff = (level[i] + 1).abs_diff(level[j]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Checks shape, entry signs and row sums of a row-stochastic matrix.
pub fn check_stochastic(p: &[Vec<f64>], tol: f64) -> Result<()> {
    let n = p.len();
    for (i, row) in p.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidModel {
                invariant: "square_matrix",
                detail: format!("row {i} has {} entries, expected {n}", row.len()),
            });
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidModel {
                invariant: "nonnegative_entries",
                detail: format!("row {i} contains {x}"),
            });
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::InvalidModel {
                invariant: "row_sums",
                detail: format!("row {i} sums to {s} (residual {:e})", (s - 1.0).abs()),
            });
        }
    }
    Ok(())
}

/// The unique probability vector with `pi P = pi` for an irreducible
/// row-stochastic `P`.
pub fn stationary_distribution(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_stochastic(p, 1e-12)?;
    let n = p.len();
    if !is_irreducible(n, |i, j| p[i][j] > 0.0) {
        return Err(Error::Reducible);
    }
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::Singular)?;
    // One round of iterative refinement.
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let total: f64 = x.iter().sum();
    Ok(x.iter().map(|v| v / total).collect())
}

/// `max_j |(pi P)_j - pi_j|`.
pub fn stationarity_residual(p: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = pi.len();
    (0..n)
        .map(|j| {
            let s: f64 = (0..n).map(|i| pi[i] * p[i][j]).sum();
            (s - pi[j]).abs()
        })
        .fold(0.0, f64::max)
}

/// Perron vector of a nonnegative irreducible operator given by `apply`,
/// normalized to unit sup norm.
///
/// Iterates `v <- (A + shift I) v` from the all-ones vector; a positive shift
/// makes the iteration converge for periodic `A` as well.
pub fn perron_vector(
    n: usize,
    shift: f64,
    apply: impl Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        apply(&v, &mut w);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += shift * vi;
        }
        let norm = w.iter().cloned().fold(0.0, f64::max);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NoConvergence { iterations: 0, change: f64::NAN });
        }
        change = 0.0;
        for (wi, vi) in w.iter_mut().zip(v.iter_mut()) {
            *wi /= norm;
            change = f64::max(change, (*wi - *vi).abs());
            *vi = *wi;
        }
        if change < POWER_TOL {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence { iterations: POWER_MAX_ITER, change })
}

/// Dense inverse, `None` when singular.
pub fn invert(m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.try_inverse()
}
