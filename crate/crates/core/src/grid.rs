//! Periodic boxes commensurate with the helix, FFTs and spectral calculus.
//!
//! Layout: a field on an `n₁ × n₂ × n₃` grid is a flat vector indexed by
//! `i₁ + n₁ (i₂ + n₂ i₃)` (x₁ fastest). Unused dimensions have `n = 1`.
//! Fourier coefficients follow `f(x) = Σ_q c_q e^{iq·x}`, i.e. `c = FFT(f)/N`.

use crate::{par, HelixError, Result, C64};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// A periodic box `[0, L₁) × … × [0, L_d)` with `n_a` points per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    pub n: [usize; 3],
    pub len: [f64; 3],
}

impl Grid {
    /// A box of `n_per` helix periods (`L₁ = 2π n_per`) with `m` points per period and the given
    /// transverse `(points, length)` pairs (`d − 1` of them).
    pub fn helical(n_per: usize, m: usize, transverse: &[(usize, f64)]) -> Result<Self> {
        if n_per == 0 || m == 0 {
            return Err(HelixError::InvalidArgument("empty helix box".into()));
        }
        Self::new(
            1 + transverse.len(),
            [n_per * m, transverse.first().map_or(1, |t| t.0), transverse.get(1).map_or(1, |t| t.0)],
            [
                2.0 * PI * n_per as f64,
                transverse.first().map_or(1.0, |t| t.1),
                transverse.get(1).map_or(1.0, |t| t.1),
            ],
        )
    }

    /// General constructor; entries beyond `d` must be `n = 1`.
    pub fn new(d: usize, n: [usize; 3], len: [f64; 3]) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(HelixError::InvalidArgument(format!("dimension {d} not in 1..=3")));
        }
        for a in 0..3 {
            if a < d && (n[a] == 0 || !(len[a] > 0.0 && len[a].is_finite())) {
                return Err(HelixError::InvalidArgument(format!("axis {a}: n = {}, L = {}", n[a], len[a])));
            }
            if a >= d && n[a] != 1 {
                return Err(HelixError::InvalidArgument(format!("axis {a} beyond d = {d} must have n = 1")));
            }
        }
        Ok(Grid { d, n, len })
    }

    pub fn npts(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn volume(&self) -> f64 {
        (0..self.d).map(|a| self.len[a]).product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.npts() as f64
    }

    /// Number of helix periods in x₁ if `L₁` is a multiple of `2π/κ`.
    pub fn periods(&self, kappa: f64) -> Result<usize> {
        let p = self.len[0] * kappa / (2.0 * PI);
        let r = p.round();
        if r < 1.0 || (p - r).abs() > 1e-9 * p.max(1.0) {
            return Err(HelixError::GridMismatch(format!(
                "L₁ = {} is not a multiple of 2π/κ (κ = {kappa})",
                self.len[0]
            )));
        }
        Ok(r as usize)
    }

    /// Helix periods for κ = 1.
    pub fn n_per(&self) -> Result<usize> {
        self.periods(1.0)
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.len[axis] * i as f64 / self.n[axis] as f64
    }

    pub fn split(&self, idx: usize) -> [usize; 3] {
        let i1 = idx % self.n[0];
        let r = idx / self.n[0];
        [i1, r % self.n[1], r / self.n[1]]
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        i[0] + self.n[0] * (i[1] + self.n[1] * i[2])
    }

    /// Coordinates of the flat index.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let i = self.split(idx);
        [self.coord(0, i[0]), self.coord(1, i[1]), self.coord(2, i[2])]
    }

    /// Signed FFT index in `[−n/2, n/2)`.
    pub fn signed(&self, axis: usize, j: usize) -> i64 {
        let n = self.n[axis] as i64;
        let j = j as i64;
        if j >= (n + 1) / 2 {
            j - n
        } else {
            j
        }
    }

    /// Physical wavenumber `2π j/L` of FFT index `j` along `axis`.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        2.0 * PI * self.signed(axis, j) as f64 / self.len[axis]
    }

    /// Whether `j` is the (unpaired) Nyquist index of an even-length axis.
    pub fn is_nyquist(&self, axis: usize, j: usize) -> bool {
        let n = self.n[axis];
        n % 2 == 0 && n > 1 && j == n / 2
    }
}

type Plan = Arc<dyn Fft<f64>>;

/// FFT plans and wavenumber tables for one [`Grid`].
#[derive(Clone)]
pub struct Spectral {
    pub grid: Grid,
    fwd: Vec<Plan>,
    inv: Vec<Plan>,
    /// `q[a][j]`: wavenumber of FFT index `j` along axis `a`.
    pub q: [Vec<f64>; 3],
    /// `iq[a][j]`: symbol of `∂_a` (zero at Nyquist).
    iq: [Vec<f64>; 3],
    keep: [Vec<bool>; 3],
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn transpose(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    par::for_each_chunk_mut(&mut out, rows, |c, row| {
        for (r, x) in row.iter_mut().enumerate() {
            *x = data[r * cols + c];
        }
    });
    out
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        for a in 0..3 {
            fwd.push(planner.plan_fft_forward(grid.n[a]));
            inv.push(planner.plan_fft_inverse(grid.n[a]));
        }
        let n_per = grid.n_per().ok();
        let q: [Vec<f64>; 3] = std::array::from_fn(|a| {
            (0..grid.n[a])
                .map(|j| match (a, n_per) {
                    (0, Some(p)) => grid.signed(0, j) as f64 / p as f64,
                    _ => grid.wavenumber(a, j),
                })
                .collect()
        });
        let iq = std::array::from_fn(|a| {
            (0..grid.n[a]).map(|j| if grid.is_nyquist(a, j) { 0.0 } else { q[a][j] }).collect()
        });
        let keep = std::array::from_fn(|a| {
            (0..grid.n[a]).map(|j| 3 * grid.signed(a, j).unsigned_abs() as usize <= grid.n[a]).collect()
        });
        Spectral { grid, fwd, inv, q, iq, keep }
    }

    fn transform(&self, data: &mut [C64], plans: &[Plan]) {
        let g = &self.grid;
        let [n1, n2, n3] = g.n;
        let rows_per_chunk = (4096 / n1).max(1) * n1;
        let p0 = &plans[0];
        par::for_each_chunk_mut(data, rows_per_chunk, |_, c| p0.process(c));
        if n2 > 1 {
            let p1 = &plans[1];
            for plane in data.chunks_mut(n1 * n2) {
                let mut t = transpose(plane, n2, n1);
                let rows = (4096 / n2).max(1) * n2;
                par::for_each_chunk_mut(&mut t, rows, |_, c| p1.process(c));
                plane.copy_from_slice(&transpose(&t, n1, n2));
            }
        }
        if n3 > 1 {
            let p2 = &plans[2];
            let mut t = transpose(data, n3, n1 * n2);
            let rows = (4096 / n3).max(1) * n3;
            par::for_each_chunk_mut(&mut t, rows, |_, c| p2.process(c));
            data.copy_from_slice(&transpose(&t, n1 * n2, n3));
        }
    }

    /// Fourier coefficients `c = FFT(f)/N`.
    pub fn forward(&self, f: &[C64]) -> Vec<C64> {
        assert_eq!(f.len(), self.grid.npts(), "field/grid size mismatch");
        let mut c = f.to_vec();
        self.transform(&mut c, &self.fwd);
        let s = 1.0 / self.grid.npts() as f64;
        par::for_each_mut(&mut c, |_, x| *x *= s);
        c
    }

    pub fn forward_real(&self, f: &[f64]) -> Vec<C64> {
        self.forward(&f.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    /// Grid values from coefficients.
    pub fn inverse(&self, c: &[C64]) -> Vec<C64> {
        assert_eq!(c.len(), self.grid.npts(), "coefficient/grid size mismatch");
        let mut f = c.to_vec();
        self.transform(&mut f, &self.inv);
        f
    }

    pub fn inverse_real(&self, c: &[C64]) -> Vec<f64> {
        self.inverse(c).into_iter().map(|z| z.re).collect()
    }

    /// Symbol-wise map `c_q ↦ s(q) c_q`.
    pub fn multiply<F>(&self, c: &[C64], symbol: F) -> Vec<C64>
    where
        F: Fn([f64; 3]) -> C64 + Sync + Send,
    {
        let g = self.grid;
        let mut out = c.to_vec();
        par::for_each_mut(&mut out, |idx, x| {
            let [j1, j2, j3] = g.split(idx);
            *x *= symbol([self.q[0][j1], self.q[1][j2], self.q[2][j3]]);
        });
        out
    }

    /// Coefficients of `∂_axis f`.
    pub fn deriv(&self, c: &[C64], axis: usize) -> Vec<C64> {
        let g = self.grid;
        let mut out = c.to_vec();
        let iq = &self.iq[axis];
        par::for_each_mut(&mut out, |idx, x| {
            let j = g.split(idx)[axis];
            *x *= C64::new(0.0, iq[j]);
        });
        out
    }

    /// Coefficients of `Δf`.
    pub fn laplacian(&self, c: &[C64]) -> Vec<C64> {
        self.multiply(c, |q| C64::new(-(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]), 0.0))
    }

    /// `|q|²` at flat index.
    pub fn q2(&self, idx: usize) -> f64 {
        let [j1, j2, j3] = self.grid.split(idx);
        self.q[0][j1].powi(2) + self.q[1][j2].powi(2) + self.q[2][j3].powi(2)
    }

    /// Wavevector at flat index.
    pub fn qvec(&self, idx: usize) -> [f64; 3] {
        let [j1, j2, j3] = self.grid.split(idx);
        [self.q[0][j1], self.q[1][j2], self.q[2][j3]]
    }

    /// Two-thirds rule: zero every coefficient with `3|j_a| > n_a` on some axis.
    pub fn dealias(&self, c: &mut [C64]) {
        let g = self.grid;
        par::for_each_mut(c, |idx, x| {
            let [j1, j2, j3] = g.split(idx);
            if !(self.keep[0][j1] && self.keep[1][j2] && self.keep[2][j3]) {
                *x = C64::new(0.0, 0.0);
            }
        });
    }

    /// Physical-space gradient components `∂_a f` (`a < d`) of a complex field.
    pub fn grad(&self, f: &[C64]) -> Vec<Vec<C64>> {
        let c = self.forward(f);
        (0..self.grid.d).map(|a| self.inverse(&self.deriv(&c, a))).collect()
    }

    /// Physical-space gradient of a real field.
    pub fn grad_real(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let c = self.forward_real(f);
        (0..self.grid.d).map(|a| self.inverse_real(&self.deriv(&c, a))).collect()
    }

    /// `∫|f|²` by the grid quadrature.
    pub fn l2_sq_grid(&self, f: &[C64]) -> f64 {
        par::sum(f.len(), |i| f[i].norm_sqr()) * self.grid.cell_volume()
    }

    /// `Vol · Σ|c|²`.
    pub fn l2_sq_coeffs(&self, c: &[C64]) -> f64 {
        par::sum(c.len(), |i| c[i].norm_sqr()) * self.grid.volume()
    }
}

/// Fourier-coefficient field on a box.
#[derive(Debug, Clone)]
pub struct SpectralField {
    pub grid: Grid,
    pub coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralField { grid, coeffs: vec![C64::new(0.0, 0.0); grid.npts()] }
    }

    pub fn from_values(sp: &Spectral, f: &[C64]) -> Self {
        SpectralField { grid: sp.grid, coeffs: sp.forward(f) }
    }

    pub fn values(&self, sp: &Spectral) -> Vec<C64> {
        sp.inverse(&self.coeffs)
    }

    /// `‖f‖²_{L²} = Vol Σ |c|²`.
    pub fn l2_sq(&self) -> f64 {
        par::sum(self.coeffs.len(), |i| self.coeffs[i].norm_sqr()) * self.grid.volume()
    }

    pub fn axpy(&mut self, a: C64, other: &SpectralField) {
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(x, y)| *x += a * y);
    }

    /// Whether coefficients are Hermitian-symmetric, `c_{−q} = conj(c_q)`, to `tol`.
    pub fn is_hermitian_symmetric(&self, tol: f64) -> bool {
        let g = self.grid;
        (0..g.npts()).all(|idx| {
            let [a, b, c] = g.split(idx);
            let neg = |j: usize, n: usize| (n - j) % n;
            let m = g.index([neg(a, g.n[0]), neg(b, g.n[1]), neg(c, g.n[2])]);
            (self.coeffs[idx] - self.coeffs[m].conj()).norm() <= tol
        })
    }
}

/// Separable Gaussian `amp · exp(−|x − x_c|²/(2σ²))` centred in the box (complex-valued).
pub fn gaussian(grid: &Grid, amp: C64, width: f64) -> Vec<C64> {
    let centre = [grid.len[0] / 2.0, grid.len[1] / 2.0, grid.len[2] / 2.0];
    (0..grid.npts())
        .map(|idx| {
            let p = grid.point(idx);
            let r2: f64 = (0..grid.d).map(|a| (p[a] - centre[a]).powi(2)).sum();
            amp * (-r2 / (2.0 * width * width)).exp()
        })
        .collect()
}
