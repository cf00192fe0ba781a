//! Quasi-momentum fibre operators `A_ξ = (−i∂ + ξ₁)² + |ξ′|² − ξ₂ cos x₁ − ξ₃ sin x₁` on the
//! circle 𝕋 = ℝ/2πℤ, their band functions `λ_n(ξ)` and eigenfunctions `φ_n(ξ, ·)`, and the
//! Lyapunov–Schmidt fixed point for the lowest band near ξ = 0.
//!
//! Everything is expressed in the orthonormal Fourier basis `e_k = e^{ikx₁}/√(2π)`,
//! `k ∈ [−K, K]`, where `A_ξ` is a Hermitian tridiagonal matrix.

use crate::tolerances as tol;
use crate::{par, tridiag, HelixError, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quasi-momentum `ξ = (ξ₁, ξ′)` on `𝕋* = [0,1) × ℝ^{d−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochWavenumber {
    d: usize,
    xi1: f64,
    xi_perp: [f64; 2],
}

impl BlochWavenumber {
    /// Validating constructor: `d ∈ {1,2,3}`, `ξ₁ ∈ [0,1)`, `xi_perp.len() == d − 1`.
    pub fn new(d: usize, xi1: f64, xi_perp: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(HelixError::InvalidArgument(format!("dimension {d} not in 1..=3")));
        }
        if !(xi1.is_finite() && (0.0..1.0).contains(&xi1)) {
            return Err(HelixError::InvalidArgument(format!("ξ₁ = {xi1} not in [0,1)")));
        }
        if xi_perp.len() != d - 1 || xi_perp.iter().any(|x| !x.is_finite()) {
            return Err(HelixError::InvalidArgument(format!(
                "transverse wavenumber must have {} finite components, got {:?}",
                d - 1,
                xi_perp
            )));
        }
        let mut p = [0.0; 2];
        p[..d - 1].copy_from_slice(xi_perp);
        Ok(BlochWavenumber { d, xi1, xi_perp: p })
    }

    /// Like [`BlochWavenumber::new`] but first reduces `ξ₁` modulo 1.
    pub fn wrapped(d: usize, xi1: f64, xi_perp: &[f64]) -> Result<Self> {
        let mut x = xi1.rem_euclid(1.0);
        if x >= 1.0 {
            x = 0.0;
        }
        Self::new(d, x, xi_perp)
    }

    pub fn d1(xi1: f64) -> Result<Self> {
        Self::new(1, xi1, &[])
    }

    pub fn d2(xi1: f64, xi2: f64) -> Result<Self> {
        Self::new(2, xi1, &[xi2])
    }

    pub fn d3(xi1: f64, xi2: f64, xi3: f64) -> Result<Self> {
        Self::new(3, xi1, &[xi2, xi3])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn xi1(&self) -> f64 {
        self.xi1
    }

    pub fn xi_perp(&self) -> &[f64] {
        &self.xi_perp[..self.d - 1]
    }

    /// `(ξ₂, ξ₃)` padded with zeros.
    pub fn perp_padded(&self) -> [f64; 2] {
        self.xi_perp
    }

    /// Representative of ξ₁ in `(−½, ½]`.
    pub fn signed_xi1(&self) -> f64 {
        if self.xi1 > 0.5 {
            self.xi1 - 1.0
        } else {
            self.xi1
        }
    }

    pub fn perp_norm(&self) -> f64 {
        self.xi_perp[0].hypot(self.xi_perp[1])
    }

    /// `|ξ|_* = sqrt(min(ξ₁, 1−ξ₁)² + |ξ′|²)`.
    pub fn reduced_dist(&self) -> f64 {
        self.signed_xi1().hypot(self.perp_norm())
    }
}

/// `A_ξ` truncated to Fourier modes `k ∈ [−K, K]`.
///
/// Storage is the diagonal plus the single sub-diagonal coupling `lower`, the amplitude of
/// mode `k+1` in `A_ξ e_k` (the same for every `k`). With `entry(k, l) = ⟨A_ξ e_k, e_l⟩`
/// this gives `entry(k, k+1) = (−ξ₂ + iξ₃)/2`.
#[derive(Debug, Clone)]
pub struct TruncatedBlochOperator {
    pub xi: BlochWavenumber,
    pub k: usize,
    pub diag: Vec<f64>,
    pub lower: C64,
}

impl TruncatedBlochOperator {
    pub fn size(&self) -> usize {
        2 * self.k + 1
    }

    /// `entry(k, l) = ⟨A_ξ e_k, e_l⟩` for modes `k, l ∈ [−K, K]`.
    pub fn entry(&self, k: i64, l: i64) -> C64 {
        let kk = self.k as i64;
        assert!(k.abs() <= kk && l.abs() <= kk, "mode outside truncation");
        if k == l {
            C64::new(self.diag[(k + kk) as usize], 0.0)
        } else if l == k + 1 {
            self.lower
        } else if l == k - 1 {
            self.lower.conj()
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Dense matrix `H` with `H[row][col]` the amplitude of mode `row` in `A_ξ e_col`.
    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let n = self.size();
        let mut h = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            h[i][i] = C64::new(self.diag[i], 0.0);
            if i + 1 < n {
                h[i + 1][i] = self.lower;
                h[i][i + 1] = self.lower.conj();
            }
        }
        h
    }

    /// `y = A_ξ x` in the truncated basis.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.size();
        (0..n)
            .map(|i| {
                let mut y = x[i] * self.diag[i];
                if i > 0 {
                    y += self.lower * x[i - 1];
                }
                if i + 1 < n {
                    y += self.lower.conj() * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Real symmetric tridiagonal form `(d, e)` and gauge phase `g` with
    /// `φ_k = g^k ψ_k` mapping real eigenvectors `ψ` to eigenvectors `φ` of `A_ξ`.
    fn gauged(&self) -> (Vec<f64>, Vec<f64>, C64) {
        let a = self.lower.norm();
        let g = if a > 0.0 { -self.lower / a } else { C64::new(1.0, 0.0) };
        (self.diag.clone(), vec![-a; self.size() - 1], g)
    }
}

/// Assembles `A_ξ` on modes `[−K, K]`; rejects `K < 2`.
pub fn assemble_operator(xi: BlochWavenumber, k: usize) -> Result<TruncatedBlochOperator> {
    if k < 2 {
        return Err(HelixError::InvalidArgument(format!("truncation K = {k} < 2")));
    }
    let [p2, p3] = xi.perp_padded();
    let pp = p2 * p2 + p3 * p3;
    let diag = (-(k as i64)..=k as i64)
        .map(|m| {
            let q = m as f64 + xi.xi1();
            q * q + pp
        })
        .collect();
    let lower = C64::new(-p2 / 2.0, p3 / 2.0);
    Ok(TruncatedBlochOperator { xi, k, diag, lower })
}

/// Lowest bands of `A_ξ` with unit eigenvectors in the Fourier basis.
#[derive(Debug, Clone, Serialize)]
pub struct BandSpectrum {
    pub xi: BlochWavenumber,
    pub k: usize,
    pub lambdas: Vec<f64>,
    /// `eigvecs[n][k + K]` is the coefficient of `e_k` in `φ_n`.
    pub eigvecs: Vec<Vec<C64>>,
}

impl BandSpectrum {
    /// Samples `φ_n(ξ, x₁) = Σ_k c_k e^{ikx₁}/√(2π)`.
    pub fn profile(&self, n: usize, x1: &[f64]) -> Result<Vec<C64>> {
        let v = self.eigvecs.get(n).ok_or_else(|| {
            HelixError::InvalidArgument(format!("band {n} not computed (have {})", self.eigvecs.len()))
        })?;
        let kk = self.k as i64;
        let norm = 1.0 / (2.0 * PI).sqrt();
        Ok(x1
            .iter()
            .map(|&x| {
                v.iter()
                    .enumerate()
                    .map(|(i, c)| c * C64::from_polar(norm, (i as i64 - kk) as f64 * x))
                    .sum()
            })
            .collect())
    }
}

/// Samples `φ_n(ξ,·)` on `x1_samples`.
pub fn eigenfunction_profile(spec: &BandSpectrum, n: usize, x1_samples: &[f64]) -> Result<Vec<C64>> {
    spec.profile(n, x1_samples)
}

fn fix_phase(v: &mut [C64], mean_index: Option<usize>) {
    let pick = match mean_index {
        Some(i) if v[i].norm() > 1e-8 => i,
        _ => {
            let mut best = 0;
            for (i, c) in v.iter().enumerate() {
                if c.norm() > v[best].norm() * (1.0 + 1e-12) {
                    best = i;
                }
            }
            best
        }
    };
    let c = v[pick];
    if c.norm() > 0.0 {
        let rot = c.conj() / c.norm();
        v.iter_mut().for_each(|x| *x *= rot);
        v[pick] = C64::new(v[pick].re, 0.0);
    }
}

fn solve_eigenpairs(op: &TruncatedBlochOperator, count: usize) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let (d, e, g) = op.gauged();
    let eig = tridiag::eigenpairs(&d, &e, count)?;
    let kk = op.k as i64;
    let vecs = eig
        .vectors
        .into_iter()
        .enumerate()
        .map(|(n, psi)| {
            let mut v: Vec<C64> = psi
                .into_iter()
                .enumerate()
                .map(|(i, x)| g.powi((i as i64 - kk) as i32) * x)
                .collect();
            fix_phase(&mut v, if n == 0 { Some(op.k) } else { None });
            v
        })
        .collect();
    Ok((eig.values, vecs))
}

/// First `n_max + 1` eigenpairs of `A_ξ`, ascending, with the phase conventions:
/// `φ₀` has a real nonnegative mean coefficient (falling back to the largest coefficient
/// when the mean coefficient vanishes), `φ_n` for `n ≥ 1` has its largest-magnitude
/// coefficient real positive. Fails if doubling `K` moves a retained band by more than
/// [`tol::TRUNCATION`]` · max(1, λ)`.
pub fn compute_bands(op: &TruncatedBlochOperator, n_max: usize) -> Result<BandSpectrum> {
    if n_max + 2 > 2 * op.k {
        return Err(HelixError::InvalidArgument(format!(
            "n_max = {n_max} exceeds 2K − 2 = {}",
            2 * op.k - 2
        )));
    }
    let (lambdas, eigvecs) = solve_eigenpairs(op, n_max + 1)?;
    for (n, (l, v)) in lambdas.iter().zip(&eigvecs).enumerate() {
        let r: f64 = op
            .apply(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b * l).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if r > tol::EIG_RESIDUAL * l.abs().max(1.0) {
            return Err(HelixError::EigenNotConverged(format!("band {n} residual {r:.3e}")));
        }
    }
    let doubled = assemble_operator(op.xi, 2 * op.k)?;
    let (d2, e2, _) = doubled.gauged();
    let check = tridiag::eigenvalues(&d2, &e2, n_max + 1)?;
    for (n, (a, b)) in lambdas.iter().zip(&check).enumerate() {
        let delta = (a - b).abs();
        if delta > tol::TRUNCATION * a.abs().max(1.0) {
            return Err(HelixError::TruncationNotConverged { band: n, k: op.k, delta });
        }
    }
    Ok(BandSpectrum { xi: op.xi, k: op.k, lambdas, eigvecs })
}

/// Convenience: assemble at `K` and compute `n_max + 1` bands.
pub fn bands(xi: BlochWavenumber, k: usize, n_max: usize) -> Result<BandSpectrum> {
    compute_bands(&assemble_operator(xi, k)?, n_max)
}

/// Solution of the Lyapunov–Schmidt system for the lowest band near ξ = 0.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSchmidtSolution {
    pub xi: BlochWavenumber,
    pub lambda0: f64,
    /// Coefficients of `V_ξ` on modes `k ∈ [−K, K]` (index `k + K`), labelled relative to the
    /// representative `ξ₁ ∈ (−½, ½]`; the `k = 0` entry is exactly zero.
    pub v_coeffs: Vec<C64>,
    pub iterations: usize,
    /// `‖A_ξ(ψ₀ + V) − λ₀(ψ₀ + V)‖ / ‖ψ₀ + V‖` in the truncated basis.
    pub residual: f64,
}

/// Lyapunov–Schmidt fixed point with the default truncation and ball radius.
pub fn lyapunov_schmidt_lambda0(xi: BlochWavenumber, tol: f64, max_iter: usize) -> Result<LyapunovSchmidtSolution> {
    lyapunov_schmidt_with(xi, tol::K_ORACLE, tol::DELTA0, tol, max_iter)
}

/// Iterates `(λ, V) ↦ (S_λ(V), S_V(λ, V))`:
///
/// * `S_λ(V) = |ξ|² + ⟨W V, ψ₀⟩` with `W = −ξ₂ cos x₁ − ξ₃ sin x₁`,
/// * `S_V(λ, V) = −(−∂²)⁻¹ P₀^⊥ [W ψ₀ + (|ξ| B_ξ − λ) V]`, `|ξ| B_ξ = 2ξ₁(−i∂) + |ξ|² + W`,
///
/// i.e. the resolvent `(1 + (−∂²)⁻¹P₀^⊥(−λ + |ξ|B_ξ))⁻¹` is realised by repeated application
/// instead of an explicit Neumann sum. Both iterates must stay in the contraction set
/// `|λ| ≤ 2|ξ|²`, `‖V‖ ≤ √2 |ξ|`.
pub fn lyapunov_schmidt_with(
    xi: BlochWavenumber,
    k: usize,
    delta0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LyapunovSchmidtSolution> {
    if k < 2 {
        return Err(HelixError::InvalidArgument(format!("truncation K = {k} < 2")));
    }
    let r = xi.reduced_dist();
    if r >= delta0 {
        return Err(HelixError::InvalidArgument(format!("|ξ|_* = {r} not below δ₀ = {delta0}")));
    }
    let s = xi.signed_xi1();
    let [p2, p3] = xi.perp_padded();
    let r2 = r * r;
    let w = C64::new(-p2 / 2.0, p3 / 2.0);
    let kk = k as i64;
    let n = 2 * k + 1;
    let c = k; // index of the mean mode
    let dg = |i: usize| {
        let q = (i as i64 - kk) as f64 + s;
        q * q + p2 * p2 + p3 * p3
    };
    // x = ψ₀ + V; (Hx)_i = D_i x_i + w x_{i−1} + w̄ x_{i+1}.
    let apply_h = |x: &[C64], i: usize| {
        let mut y = x[i] * dg(i);
        if i > 0 {
            y += w * x[i - 1];
        }
        if i + 1 < n {
            y += w.conj() * x[i + 1];
        }
        y
    };
    let lam_bound = 2.0 * r2 * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let v_bound = 2f64.sqrt() * r * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut lambda = 0.0;
    let mut v = vec![C64::new(0.0, 0.0); n];
    for it in 1..=max_iter {
        let mut x = v.clone();
        x[c] = C64::new(1.0, 0.0);
        let new_lambda = (apply_h(&x, c)).re;
        let mut new_v = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            if i == c {
                continue;
            }
            let m = (i as i64 - kk) as f64;
            // (A_ξ x)_i − λ v_i − m² v_i  =  [(|ξ|B_ξ − λ)V + Wψ₀]_i
            let rhs = apply_h(&x, i) - x[i] * (lambda + m * m);
            new_v[i] = -rhs / (m * m);
        }
        let dl = (new_lambda - lambda).abs();
        let dv = new_v.iter().zip(&v).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        lambda = new_lambda;
        v = new_v;
        let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if lambda.abs() > lam_bound || vn > v_bound || !lambda.is_finite() {
            return Err(HelixError::ContractionViolated {
                iterations: it,
                reason: format!("|λ| = {:.3e} (bound {:.3e}), ‖V‖ = {:.3e} (bound {:.3e})", lambda.abs(), lam_bound, vn, v_bound),
            });
        }
        if dl + dv <= tol {
            let mut x = v.clone();
            x[c] = C64::new(1.0, 0.0);
            let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let residual = (0..n).map(|i| (apply_h(&x, i) - x[i] * lambda).norm_sqr()).sum::<f64>().sqrt() / xn;
            return Ok(LyapunovSchmidtSolution { xi, lambda0: lambda, v_coeffs: v, iterations: it, residual });
        }
    }
    Err(HelixError::ContractionViolated { iterations: max_iter, reason: "iteration cap reached".into() })
}

/// One row of a band scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanPoint {
    pub xi: BlochWavenumber,
    pub lambdas: [f64; 3],
    /// `λ₀/|ξ|_*²`, absent at `|ξ|_* = 0`.
    pub ratio: Option<f64>,
}

/// Results of [`band_scan`].
#[derive(Debug, Clone, Serialize)]
pub struct SpectralScanReport {
    pub points: Vec<ScanPoint>,
    /// `min λ₀/|ξ|_*²` over points with `|ξ|_* > 0`.
    pub theta0_measured: f64,
    /// `min λ₁` over the grid.
    pub gap_measured: f64,
    pub theta0_argmin: Option<BlochWavenumber>,
    pub gap_argmin: Option<BlochWavenumber>,
}

impl SpectralScanReport {
    pub fn lambda0_over_dist2(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.ratio).collect()
    }
}

/// Evaluates `λ₀, λ₁, λ₂` on every grid point (in parallel) and the Prop.-type floors.
pub fn band_scan(grid: &[BlochWavenumber], k: usize) -> Result<SpectralScanReport> {
    let rows = par::map_slice(grid, |&xi| {
        bands(xi, k, 2)
            .map(|b| {
                let r = xi.reduced_dist();
                ScanPoint {
                    xi,
                    lambdas: [b.lambdas[0], b.lambdas[1], b.lambdas[2]],
                    ratio: (r > 0.0).then(|| b.lambdas[0] / (r * r)),
                }
            })
            .map_err(|e| HelixError::AtWavenumber {
                xi1: xi.xi1(),
                xi_perp: xi.xi_perp().to_vec(),
                source: Box::new(e),
            })
    });
    let points = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut theta0 = f64::INFINITY;
    let mut gap = f64::INFINITY;
    let (mut ta, mut ga) = (None, None);
    for p in &points {
        if let Some(r) = p.ratio {
            if r < theta0 {
                theta0 = r;
                ta = Some(p.xi);
            }
        }
        if p.lambdas[1] < gap {
            gap = p.lambdas[1];
            ga = Some(p.xi);
        }
    }
    Ok(SpectralScanReport { points, theta0_measured: theta0, gap_measured: gap, theta0_argmin: ta, gap_argmin: ga })
}

/// `ξ₁ = i/n1` (i < n1) × `ξ₂ = linspace(lo, hi, n2)` in d = 2.
pub fn uniform_grid_2d(n1: usize, xi2_lo: f64, xi2_hi: f64, n2: usize) -> Result<Vec<BlochWavenumber>> {
    if n1 == 0 || n2 == 0 || !(xi2_lo <= xi2_hi) {
        return Err(HelixError::InvalidArgument(format!(
            "grid spec: n1 = {n1}, n2 = {n2}, ξ₂ ∈ [{xi2_lo}, {xi2_hi}]"
        )));
    }
    let mut out = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let x2 = if n2 == 1 { xi2_lo } else { xi2_lo + (xi2_hi - xi2_lo) * j as f64 / (n2 - 1) as f64 };
            out.push(BlochWavenumber::d2(i as f64 / n1 as f64, x2)?);
        }
    }
    Ok(out)
}

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the scan as CSV `xi1,xi2,xi3,lambda0,lambda1,lambda2,ratio`.
pub fn write_scan_csv<W: std::io::Write>(report: &SpectralScanReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "xi1,xi2,xi3,lambda0,lambda1,lambda2,ratio")?;
    for p in &report.points {
        let [x2, x3] = p.xi.perp_padded();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt17(p.xi.xi1()),
            fmt17(x2),
            fmt17(x3),
            fmt17(p.lambdas[0]),
            fmt17(p.lambdas[1]),
            fmt17(p.lambdas[2]),
            p.ratio.map(fmt17).unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Maximum violation of `λ_n(ξ₁,ξ′) = λ_n(1−ξ₁,ξ′) = λ_n(ξ₁,−ξ′)` over the scan points.
pub fn symmetry_defect(report: &SpectralScanReport, k: usize) -> Result<f64> {
    let defects = par::map_slice(&report.points, |p| -> Result<f64> {
        let xi = p.xi;
        let neg: Vec<f64> = xi.xi_perp().iter().map(|x| -x).collect();
        let a = bands(BlochWavenumber::wrapped(xi.d(), 1.0 - xi.xi1(), xi.xi_perp())?, k, 2)?;
        let b = bands(BlochWavenumber::new(xi.d(), xi.xi1(), &neg)?, k, 2)?;
        Ok((0..3)
            .map(|n| (p.lambdas[n] - a.lambdas[n]).abs().max((p.lambdas[n] - b.lambdas[n]).abs()))
            .fold(0.0, f64::max))
    });
    defects.into_iter().try_fold(0.0_f64, |m, d| Ok(m.max(d?)))
}

/// Result of the monotonicity check at one transverse wavenumber.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityCheck {
    pub xi_perp: f64,
    pub lambda0_nondecreasing: bool,
    pub lambda1_nonincreasing: bool,
    /// `λ₀(0) < λ₀(½) < λ₁(½) < λ₁(0)` (only meaningful for `ξ′ ≠ 0`).
    pub interlacing: bool,
}

impl MonotonicityCheck {
    pub fn passed(&self) -> bool {
        self.lambda0_nondecreasing && self.lambda1_nonincreasing && (self.xi_perp == 0.0 || self.interlacing)
    }
}

/// Checks monotonicity of `λ₀` (↑) and `λ₁` (↓) on `ξ₁ = i/(2·samples)`, `i = 0..=samples`.
pub fn monotonicity_check(xi2: f64, samples: usize, k: usize) -> Result<MonotonicityCheck> {
    let pts: Vec<f64> = (0..=samples).map(|i| 0.5 * i as f64 / samples as f64).collect();
    let bs = pts
        .iter()
        .map(|&x| bands(BlochWavenumber::d2(x, xi2)?, k, 1))
        .collect::<Result<Vec<_>>>()?;
    let s = tol::MONOTONICITY_SLACK;
    let inc = bs.windows(2).all(|w| w[1].lambdas[0] >= w[0].lambdas[0] - s);
    let dec = bs.windows(2).all(|w| w[1].lambdas[1] <= w[0].lambdas[1] + s);
    let (a, b) = (&bs[0], &bs[samples]);
    let inter = a.lambdas[0] < b.lambdas[0] && b.lambdas[0] < b.lambdas[1] && b.lambdas[1] < a.lambdas[1];
    Ok(MonotonicityCheck { xi_perp: xi2, lambda0_nondecreasing: inc, lambda1_nonincreasing: dec, interlacing: inter })
}
