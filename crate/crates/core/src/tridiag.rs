//! Real symmetric tridiagonal eigensolver: Sturm-sequence bisection for eigenvalues and
//! inverse iteration (with Gram–Schmidt inside clusters) for eigenvectors.
//!
//! The matrix is given by its diagonal `d` (length n) and off-diagonal `e` (length n−1).
//! Negligible off-diagonals split the matrix into unreduced blocks that are solved
//! independently and merged with a stable ascending sort.

use crate::{HelixError, Result};

/// Eigenpairs of a symmetric tridiagonal matrix, ascending.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    /// `vectors[j]` is the unit eigenvector of `values[j]` (length n).
    pub vectors: Vec<Vec<f64>>,
}

const MAX_BISECT: usize = 256;
const MAX_INVERSE_ITER: usize = 10;

fn check_shape(d: &[f64], e: &[f64]) -> Result<()> {
    if d.is_empty() || e.len() + 1 != d.len() {
        return Err(HelixError::InvalidArgument(format!(
            "tridiagonal shape: diag {} / off {}",
            d.len(),
            e.len()
        )));
    }
    if d.iter().chain(e).any(|x| !x.is_finite()) {
        return Err(HelixError::InvalidArgument("non-finite matrix entry".into()));
    }
    Ok(())
}

fn gershgorin(d: &[f64], e: &[f64]) -> (f64, f64) {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    (lo, hi)
}

fn pivmin(e: &[f64]) -> f64 {
    let m = e.iter().fold(1.0_f64, |m, x| m.max(x * x));
    f64::MIN_POSITIVE * m
}

/// Number of eigenvalues strictly below `x` (Sturm count via the LDLᵀ pivots).
pub fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let pmin = pivmin(e);
    let mut count = 0;
    let mut q = d[0] - x;
    if q.abs() < pmin {
        q = -pmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q.abs() < pmin {
            q = -pmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th (0-based, ascending) eigenvalue by bisection on the Sturm count.
fn bisect(d: &[f64], e: &[f64], index: usize, bounds: (f64, f64)) -> f64 {
    let (mut lo, mut hi) = bounds;
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    lo -= 2.0 * f64::EPSILON * scale;
    hi += 2.0 * f64::EPSILON * scale;
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + pivmin(e);
        if hi - lo <= tol {
            break;
        }
        if sturm_count(d, e, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Row-pivoted LU of `T − λI` for a tridiagonal `T`, used by inverse iteration.
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swap: Vec<bool>,
}

impl ShiftedLu {
    fn new(d: &[f64], e: &[f64], lambda: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swap = vec![false; n];
        let guard = |x: f64| if x.abs() < tiny { if x < 0.0 { -tiny } else { tiny } } else { x };
        let mut a = d[0] - lambda;
        let mut b = if n > 1 { e[0] } else { 0.0 };
        for i in 0..n.saturating_sub(1) {
            let c = e[i];
            let a_next = d[i + 1] - lambda;
            let b_next = if i + 2 < n { e[i + 1] } else { 0.0 };
            if a.abs() >= c.abs() {
                let a_g = guard(a);
                let m = c / a_g;
                u0[i] = a_g;
                u1[i] = b;
                u2[i] = 0.0;
                l[i] = m;
                a = a_next - m * b;
                b = b_next;
            } else {
                let m = a / c;
                u0[i] = c;
                u1[i] = a_next;
                u2[i] = b_next;
                l[i] = m;
                swap[i] = true;
                a = b - m * a_next;
                b = -m * b_next;
            }
        }
        u0[n - 1] = guard(a);
        ShiftedLu { u0, u1, u2, l, swap }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n.saturating_sub(1) {
            if self.swap[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= self.l[i] * rhs[i];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= self.u1[i] * rhs[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * rhs[i + 2];
            }
            rhs[i] = s / self.u0[i];
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(d: &[f64], e: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let n = d.len();
    let mut r = 0.0;
    for i in 0..n {
        let mut y = (d[i] - lambda) * x[i];
        if i > 0 {
            y += e[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            y += e[i] * x[i + 1];
        }
        r += y * y;
    }
    r.sqrt()
}

/// Eigenpairs of one unreduced block (all `count` lowest).
fn block_eigen(d: &[f64], e: &[f64], count: usize) -> Result<TridiagEigen> {
    let n = d.len();
    let count = count.min(n);
    if n == 1 {
        return Ok(TridiagEigen { values: vec![d[0]], vectors: vec![vec![1.0]] });
    }
    let bounds = gershgorin(d, e);
    let values: Vec<f64> = (0..count).map(|j| bisect(d, e, j, bounds)).collect();
    let tnorm = bounds.0.abs().max(bounds.1.abs()).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * tnorm;
    let cluster_tol = 1e-3 * tnorm;
    let res_tol = 1e-3 * crate::tolerances::EIG_RESIDUAL * values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut cluster_start = 0;
    for j in 0..count {
        if j > 0 && values[j] - values[j - 1] > cluster_tol {
            cluster_start = j;
        }
        let lu = ShiftedLu::new(d, e, values[j], tiny);
        // Deterministic, non-degenerate starting vector.
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 1.618_033_988_749_895 + j as f64 * 0.414_213_562).sin())
            .collect();
        let mut converged = false;
        for _ in 0..MAX_INVERSE_ITER {
            lu.solve(&mut x);
            for v in &vectors[cluster_start..j] {
                let dot: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= dot * vi);
            }
            let nx = norm(&x);
            if !(nx.is_finite() && nx > 0.0) {
                return Err(HelixError::EigenNotConverged(format!(
                    "inverse iteration broke down at eigenvalue {} ({})",
                    j, values[j]
                )));
            }
            x.iter_mut().for_each(|v| *v /= nx);
            if residual(d, e, values[j], &x) <= res_tol.max(4.0 * tiny) {
                converged = true;
                break;
            }
        }
        if !converged {
            let r = residual(d, e, values[j], &x);
            if r > crate::tolerances::EIG_RESIDUAL * values[j].abs().max(1.0) {
                return Err(HelixError::EigenNotConverged(format!(
                    "eigenvector {} residual {:.3e}",
                    j, r
                )));
            }
        }
        vectors.push(x);
    }
    Ok(TridiagEigen { values, vectors })
}

/// Split points: indices `i` with negligible `e[i]`.
fn split_blocks(d: &[f64], e: &[f64]) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..e.len() {
        if e[i] == 0.0 || e[i].abs() <= 0.5 * f64::EPSILON * (d[i].abs() + d[i + 1].abs()) {
            blocks.push((start, i + 1));
            start = i + 1;
        }
    }
    blocks.push((start, d.len()));
    blocks
}

/// The `count` lowest eigenvalues, ascending.
pub fn eigenvalues(d: &[f64], e: &[f64], count: usize) -> Result<Vec<f64>> {
    check_shape(d, e)?;
    let mut all = Vec::new();
    for (lo, hi) in split_blocks(d, e) {
        let (bd, be) = (&d[lo..hi], &e[lo..hi - 1]);
        let take = count.min(hi - lo);
        if hi - lo == 1 {
            all.push(bd[0]);
            continue;
        }
        let bounds = gershgorin(bd, be);
        all.extend((0..take).map(|j| bisect(bd, be, j, bounds)));
    }
    all.sort_by(|a, b| a.total_cmp(b));
    all.truncate(count);
    Ok(all)
}

/// The `count` lowest eigenpairs, ascending; equal eigenvalues keep index order.
pub fn eigenpairs(d: &[f64], e: &[f64], count: usize) -> Result<TridiagEigen> {
    check_shape(d, e)?;
    let n = d.len();
    let mut all: Vec<(f64, Vec<f64>)> = Vec::new();
    for (lo, hi) in split_blocks(d, e) {
        let be = if hi - lo > 1 { &e[lo..hi - 1] } else { &e[0..0] };
        let sub = block_eigen(&d[lo..hi], be, count)?;
        for (v, x) in sub.values.into_iter().zip(sub.vectors) {
            let mut full = vec![0.0; n];
            full[lo..hi].copy_from_slice(&x);
            all.push((v, full));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(count);
    let (values, vectors) = all.into_iter().unzip();
    Ok(TridiagEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 20;
        let (d, e) = laplacian(n);
        let eig = eigenpairs(&d, &e, n).unwrap();
        for (j, &v) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((j + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "{} vs {}", v, exact);
            assert!(residual(&d, &e, v, &eig.vectors[j]) < 1e-12);
        }
    }

    #[test]
    fn diagonal_matrix_splits_and_sorts_stably() {
        let d = vec![4.0, 1.0, 0.0, 1.0, 4.0];
        let e = vec![0.0; 4];
        let eig = eigenpairs(&d, &e, 5).unwrap();
        assert_eq!(eig.values, vec![0.0, 1.0, 1.0, 4.0, 4.0]);
        // Ties keep index order: the first `1.0` is at index 1.
        assert_eq!(eig.vectors[1][1], 1.0);
        assert_eq!(eig.vectors[2][3], 1.0);
    }

    #[test]
    fn sturm_count_brackets() {
        let (d, e) = laplacian(10);
        assert_eq!(sturm_count(&d, &e, -1.0), 0);
        assert_eq!(sturm_count(&d, &e, 5.0), 10);
        assert_eq!(sturm_count(&d, &e, 2.0 + 1e-9), 5);
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(eigenpairs(&[1.0, 2.0], &[], 1).is_err());
        assert!(eigenvalues(&[], &[], 1).is_err());
    }

    proptest! {
        #[test]
        fn random_matrices_give_orthonormal_small_residual_pairs(
            d in proptest::collection::vec(-10.0f64..10.0, 2..24),
            seed in 0u64..1000,
        ) {
            let n = d.len();
            let e: Vec<f64> = (0..n - 1).map(|i| (((i as u64 + 1) * (seed + 3)) % 17) as f64 / 8.0 - 1.0).collect();
            let eig = eigenpairs(&d, &e, n).unwrap();
            let trace: f64 = d.iter().sum();
            let sum: f64 = eig.values.iter().sum();
            prop_assert!((trace - sum).abs() < 1e-10 * (1.0 + trace.abs()));
            for j in 0..n {
                prop_assert!(residual(&d, &e, eig.values[j], &eig.vectors[j]) < 1e-10 * eig.values[j].abs().max(1.0));
                for k in 0..j {
                    let dot: f64 = eig.vectors[j].iter().zip(&eig.vectors[k]).map(|(a, b)| a * b).sum();
                    prop_assert!(dot.abs() < 1e-8);
                }
                if j > 0 {
                    prop_assert!(eig.values[j] >= eig.values[j - 1]);
                }
            }
        }
    }
}
