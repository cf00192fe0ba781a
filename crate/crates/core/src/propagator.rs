//! Discrete Bloch–Fourier calculus on a commensurate periodic box: Bloch decomposition,
//! the exact semigroup `e^{t(−α+i)A}`, the projections `Q_L`/`Q_H`, the low-frequency
//! kernel `G_L`, Duhamel integration and the spectral powers `(1+A)^{s/2}`.
//!
//! On a box with `L₁ = 2π N_per`, the x₁-wavenumbers are `q = j/N_per`. Writing
//! `j = r + N_per k` with `r ∈ [0, N_per)` groups the coefficients into blocks with
//! quasi-momentum `ξ₁ = r/N_per` and ladder `k`; together with the transverse wavevector
//! each block carries a truncated `A_ξ` on exactly the ladder present in the grid.
//!
//! Eigen-coordinates ("slots") are stored flat: slot `b·m + n` is band `n` of block `b`,
//! where `m` is the ladder length (points per helix period).

use crate::bloch::{assemble_operator, bands, BlochWavenumber};
use crate::grid::{Grid, Spectral, SpectralField};
use crate::tolerances as tol;
use crate::{par, tridiag, HelixError, Result, C64};
use serde::Serialize;
use std::f64::consts::PI;

/// Quintic smootherstep on `[0, 1]`.
fn smootherstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// `χ(r)`: 1 for `r ≤ δ₀/2`, 0 for `r ≥ δ₀`, quintic smootherstep in between.
pub fn cutoff(r: f64, delta0: f64) -> f64 {
    1.0 - smootherstep((r - 0.5 * delta0) / (0.5 * delta0))
}

/// The low-frequency cutoff sampled on the discrete quasi-momenta of a box (one value per block).
#[derive(Debug, Clone, Serialize)]
pub struct CutoffProfile {
    pub delta0: f64,
    pub values: Vec<f64>,
}

/// One Bloch block: the coefficients along the ladder `k ∈ ξ₁ + ℤ` at one transverse wavevector.
#[derive(Debug, Clone)]
pub struct BlochBlock {
    pub xi: BlochWavenumber,
    /// Ladder values `k` (ascending) such that the x₁-wavenumber is `k + ξ₁`.
    pub ks: Vec<i64>,
    pub coeffs: Vec<C64>,
}

/// All blocks of a field.
#[derive(Debug, Clone)]
pub struct BlochDecomposition {
    pub grid: Grid,
    pub blocks: Vec<BlochBlock>,
}

/// Index bookkeeping shared by decomposition and cache.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    pub grid: Grid,
    pub n_per: usize,
    /// Ladder length (points per helix period).
    pub m: usize,
    /// `ladder[b·m + i]` is the coefficient index of entry `i` of block `b`.
    pub ladder: Vec<usize>,
    pub xi: Vec<BlochWavenumber>,
    pub k_min: Vec<i64>,
}

impl BlockLayout {
    pub fn new(grid: Grid) -> Result<Self> {
        let n_per = grid.n_per()?;
        let n0 = grid.n[0];
        if n0 % n_per != 0 {
            return Err(HelixError::GridMismatch(format!("n₁ = {n0} is not a multiple of N_per = {n_per}")));
        }
        let m = n0 / n_per;
        let ntrans = grid.n[1] * grid.n[2];
        let nblocks = n_per * ntrans;
        let mut ladder = vec![0; nblocks * m];
        let mut xi = Vec::with_capacity(nblocks);
        let mut k_min = Vec::with_capacity(nblocks);
        // Axis-0 indices grouped by residue, sorted by signed index.
        let mut by_res: Vec<Vec<(i64, usize)>> = vec![Vec::with_capacity(m); n_per];
        for j in 0..n0 {
            let s = grid.signed(0, j);
            by_res[s.rem_euclid(n_per as i64) as usize].push((s, j));
        }
        by_res.iter_mut().for_each(|v| v.sort());
        for t in 0..ntrans {
            let (i2, i3) = (t % grid.n[1], t / grid.n[1]);
            let perp: Vec<f64> = [(1, i2), (2, i3)]
                .iter()
                .take(grid.d - 1)
                .map(|&(a, i)| grid.wavenumber(a, i))
                .collect();
            for (r, list) in by_res.iter().enumerate() {
                let b = t * n_per + r;
                for (i, &(_, j)) in list.iter().enumerate() {
                    ladder[b * m + i] = grid.index([j, i2, i3]);
                }
                xi.push(BlochWavenumber::new(grid.d, r as f64 / n_per as f64, &perp)?);
                k_min.push((list[0].0 - r as i64) / n_per as i64);
            }
        }
        Ok(BlockLayout { grid, n_per, m, ladder, xi, k_min })
    }

    pub fn nblocks(&self) -> usize {
        self.xi.len()
    }

    pub fn block_ladder(&self, b: usize) -> &[usize] {
        &self.ladder[b * self.m..(b + 1) * self.m]
    }
}

/// Splits coefficients into Bloch blocks (a pure reindexing).
pub fn bloch_decompose(f: &SpectralField, layout: &BlockLayout) -> Result<BlochDecomposition> {
    if f.grid != layout.grid {
        return Err(HelixError::GridMismatch("field and layout grids differ".into()));
    }
    let blocks = (0..layout.nblocks())
        .map(|b| BlochBlock {
            xi: layout.xi[b],
            ks: (0..layout.m as i64).map(|i| layout.k_min[b] + i).collect(),
            coeffs: layout.block_ladder(b).iter().map(|&i| f.coeffs[i]).collect(),
        })
        .collect();
    Ok(BlochDecomposition { grid: f.grid, blocks })
}

/// Inverse of [`bloch_decompose`].
pub fn bloch_reassemble(dec: &BlochDecomposition, layout: &BlockLayout) -> Result<SpectralField> {
    if dec.grid != layout.grid || dec.blocks.len() != layout.nblocks() {
        return Err(HelixError::GridMismatch("decomposition does not match layout".into()));
    }
    let mut out = SpectralField::zeros(dec.grid);
    for (b, blk) in dec.blocks.iter().enumerate() {
        for (&i, &c) in layout.block_ladder(b).iter().zip(&blk.coeffs) {
            out.coeffs[i] = c;
        }
    }
    Ok(out)
}

/// Which eigenpairs a cache holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CacheMode {
    /// Every band of every block; supports all operations.
    Full,
    /// Only `φ₀` of blocks with `χ > 0`; supports `e^{tL}Q_L` and `Q_L`.
    LowBand,
}

/// `φ₁(z) = (e^z − 1)/z` and `φ₂(z) = (e^z − 1 − z)/z²`, with Taylor series near 0.
pub fn phi12(z: C64) -> (C64, C64) {
    if z.norm() < 0.25 {
        // Σ z^k/(k+1)! and Σ z^k/(k+2)!.
        let mut p1 = C64::new(0.0, 0.0);
        let mut p2 = C64::new(0.0, 0.0);
        let mut zk = C64::new(1.0, 0.0);
        let mut fact = 1.0; // (k+1)!
        for k in 0..18 {
            p1 += zk / fact;
            fact *= k as f64 + 2.0;
            p2 += zk / fact;
            zk *= z;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

/// Per-block eigendecompositions of the truncated `A_ξ` on a box.
///
/// Only `d ≤ 2` is supported: there the block operators are real up to a sign gauge
/// `φ_i = g^i ψ_i`, `g = ±1`, and `ψ` is stored as real numbers.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    pub layout: BlockLayout,
    pub mode: CacheMode,
    pub cutoff: CutoffProfile,
    /// Bands stored per block (`m` in full mode, 1 in low-band mode).
    pub nb: usize,
    /// Blocks with stored eigenpairs (all blocks in full mode).
    pub active: Vec<usize>,
    /// `lambda[a·nb + n]` for active block `a`.
    pub lambda: Vec<f64>,
    /// `psi[(a·nb + n)·m + i]`.
    psi: Vec<f64>,
    gauge: Vec<f64>,
    /// Q_L weight per slot (full mode) — `χ` on band 0 (d ≥ 2) or `1_{|q|≤1}` (d = 1).
    pub low_weight: Vec<f64>,
    /// Largest eigen-residual `‖A_ξφ − λφ‖/max(1,λ)` over the cache.
    pub max_residual: f64,
}

impl PropagatorCache {
    /// Full cache with the default cutoff radius.
    pub fn new(grid: Grid) -> Result<Self> {
        Self::build(grid, tol::DELTA0_CUTOFF, CacheMode::Full)
    }

    pub fn build(grid: Grid, delta0: f64, mode: CacheMode) -> Result<Self> {
        if grid.d > 2 {
            return Err(HelixError::InvalidArgument("the box propagator supports d ≤ 2".into()));
        }
        if !(delta0 > 0.0 && delta0 < 0.5) {
            return Err(HelixError::InvalidArgument(format!("cutoff radius δ₀ = {delta0} must lie in (0, ½)")));
        }
        let layout = BlockLayout::new(grid)?;
        let m = layout.m;
        // d = 1 uses the sharp Fourier cutoff |q| ≤ 1 over all bands; the low-band mode
        // therefore only applies for d ≥ 2.
        let mode = if grid.d == 1 { CacheMode::Full } else { mode };
        let chi: Vec<f64> = layout.xi.iter().map(|x| cutoff(x.reduced_dist(), delta0)).collect();
        let active: Vec<usize> = match mode {
            CacheMode::Full => (0..layout.nblocks()).collect(),
            CacheMode::LowBand => (0..layout.nblocks()).filter(|&b| chi[b] > 0.0).collect(),
        };
        let nb = if mode == CacheMode::Full { m } else { 1 };
        let solved = par::map_slice(&active, |&b| -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
            let xi = layout.xi[b];
            let k0 = layout.k_min[b];
            let p2 = xi.perp_padded()[0];
            let diag: Vec<f64> = (0..m as i64)
                .map(|i| {
                    let q = (k0 + i) as f64 + xi.xi1();
                    q * q + p2 * p2
                })
                .collect();
            let a = 0.5 * p2.abs();
            let off = vec![-a; m.saturating_sub(1)];
            let g = if p2 < 0.0 { -1.0 } else { 1.0 };
            let eig = tridiag::eigenpairs(&diag, &off, nb)?;
            let mut res = 0.0_f64;
            for (l, v) in eig.values.iter().zip(&eig.vectors) {
                let r: f64 = (0..m)
                    .map(|i| {
                        let mut y = diag[i] * v[i];
                        if i > 0 {
                            y += off[i - 1] * v[i - 1];
                        }
                        if i + 1 < m {
                            y += off[i] * v[i + 1];
                        }
                        (y - l * v[i]).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                res = res.max(r / l.abs().max(1.0));
            }
            Ok((eig.values, eig.vectors.concat(), g, res))
        });
        let mut lambda = Vec::with_capacity(active.len() * nb);
        let mut psi = Vec::with_capacity(active.len() * nb * m);
        let mut gauge = Vec::with_capacity(active.len());
        let mut max_residual = 0.0_f64;
        for s in solved {
            let (l, p, g, r) = s?;
            lambda.extend(l);
            psi.extend(p);
            gauge.push(g);
            max_residual = max_residual.max(r);
        }
        if max_residual > tol::EIG_RESIDUAL {
            return Err(HelixError::EigenNotConverged(format!("block residual {max_residual:.3e}")));
        }
        let low_weight = (0..active.len() * nb)
            .map(|slot| {
                let (a, n) = (slot / nb, slot % nb);
                if grid.d == 1 {
                    if lambda[slot] <= 1.0 + 1e-9 {
                        1.0
                    } else {
                        0.0
                    }
                } else if n == 0 {
                    chi[active[a]]
                } else {
                    0.0
                }
            })
            .collect();
        Ok(PropagatorCache {
            layout,
            mode,
            cutoff: CutoffProfile { delta0, values: chi },
            nb,
            active,
            lambda,
            psi,
            gauge,
            low_weight,
            max_residual,
        })
    }

    pub fn grid(&self) -> Grid {
        self.layout.grid
    }

    pub fn nslots(&self) -> usize {
        self.lambda.len()
    }

    fn require_full(&self, what: &str) -> Result<()> {
        if self.mode != CacheMode::Full {
            return Err(HelixError::InvalidArgument(format!("{what} needs a full propagator cache")));
        }
        Ok(())
    }

    fn check(&self, c: &[C64]) -> Result<()> {
        if c.len() != self.layout.grid.npts() {
            return Err(HelixError::GridMismatch(format!(
                "{} coefficients for a grid of {}",
                c.len(),
                self.layout.grid.npts()
            )));
        }
        Ok(())
    }

    #[inline]
    fn phi(&self, a: usize, n: usize, i: usize) -> f64 {
        let m = self.layout.m;
        let s = if i % 2 == 1 { self.gauge[a] } else { 1.0 };
        s * self.psi[(a * self.nb + n) * m + i]
    }

    /// Eigen-coordinates `⟨block, φ_n⟩` for every stored slot.
    pub fn to_eigen(&self, c: &[C64]) -> Result<Vec<C64>> {
        self.check(c)?;
        let m = self.layout.m;
        let per: Vec<Vec<C64>> = par::map_range(self.active.len(), |a| {
            let lad = self.layout.block_ladder(self.active[a]);
            (0..self.nb)
                .map(|n| (0..m).map(|i| c[lad[i]] * self.phi(a, n, i)).sum())
                .collect()
        });
        Ok(per.concat())
    }

    /// Reassembles coefficients from eigen-coordinates (entries outside active blocks are zero).
    pub fn from_eigen(&self, e: &[C64]) -> Result<Vec<C64>> {
        if e.len() != self.nslots() {
            return Err(HelixError::GridMismatch(format!("{} eigen-coordinates, expected {}", e.len(), self.nslots())));
        }
        let m = self.layout.m;
        let per: Vec<Vec<C64>> = par::map_range(self.active.len(), |a| {
            (0..m)
                .map(|i| (0..self.nb).map(|n| e[a * self.nb + n] * self.phi(a, n, i)).sum())
                .collect()
        });
        let mut out = vec![C64::new(0.0, 0.0); self.layout.grid.npts()];
        for (a, vals) in per.into_iter().enumerate() {
            for (&i, v) in self.layout.block_ladder(self.active[a]).iter().zip(vals) {
                out[i] = v;
            }
        }
        Ok(out)
    }

    /// `c ↦ Σ f(λ_n, w_n) ⟨c, φ_n⟩ φ_n` with `w_n` the Q_L weight of the slot.
    pub fn spectral_map<F>(&self, c: &[C64], f: F) -> Result<Vec<C64>>
    where
        F: Fn(f64, f64) -> C64 + Sync + Send,
    {
        let mut e = self.to_eigen(c)?;
        par::for_each_mut(&mut e, |s, x| *x *= f(self.lambda[s], self.low_weight[s]));
        self.from_eigen(&e)
    }

    /// `e^{t(−α+i)A} f`.
    pub fn apply_semigroup(&self, f: &SpectralField, t: f64, alpha: f64) -> Result<SpectralField> {
        self.require_full("the semigroup")?;
        check_time(t, alpha)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        let k = C64::new(-alpha, 1.0) * t;
        Ok(SpectralField { grid: f.grid, coeffs: self.spectral_map(&f.coeffs, |l, _| (k * l).exp())? })
    }

    /// `Q_L f`.
    pub fn project_low(&self, f: &SpectralField) -> Result<SpectralField> {
        Ok(SpectralField { grid: f.grid, coeffs: self.spectral_map(&f.coeffs, |_, w| C64::new(w, 0.0))? })
    }

    /// `Q_H f = f − Q_L f`.
    pub fn project_high(&self, f: &SpectralField) -> Result<SpectralField> {
        self.require_full("Q_H")?;
        let low = self.project_low(f)?;
        Ok(SpectralField { grid: f.grid, coeffs: f.coeffs.iter().zip(&low.coeffs).map(|(a, b)| a - b).collect() })
    }

    /// `e^{t(−α+i)A} Q_L f` (works in both cache modes).
    pub fn evolve_low(&self, f: &SpectralField, t: f64, alpha: f64) -> Result<SpectralField> {
        check_time(t, alpha)?;
        let k = C64::new(-alpha, 1.0) * t;
        Ok(SpectralField {
            grid: f.grid,
            coeffs: self.spectral_map(&f.coeffs, |l, w| if w > 0.0 { (k * l).exp() * w } else { C64::new(0.0, 0.0) })?,
        })
    }

    /// `(1 + A)^{s/2} f` evaluated per block through the eigenpairs.
    pub fn one_plus_a_pow(&self, f: &SpectralField, s: f64) -> Result<SpectralField> {
        self.require_full("(1+A)^{s/2}")?;
        Ok(SpectralField { grid: f.grid, coeffs: self.spectral_map(&f.coeffs, |l, _| C64::new((1.0 + l).powf(s / 2.0), 0.0))? })
    }

    /// `⟨Af, f⟩ = Vol Σ λ_n |⟨f, φ_n⟩|²`.
    pub fn a_quadratic(&self, f: &SpectralField) -> Result<f64> {
        self.require_full("⟨Au,u⟩")?;
        let e = self.to_eigen(&f.coeffs)?;
        Ok(par::sum(e.len(), |s| self.lambda[s] * e[s].norm_sqr()) * f.grid.volume())
    }

    /// Spectral floor of `A` on the range of `Q_H`: the least `λ` over slots with `1 − w > 0`.
    pub fn high_floor(&self) -> Result<f64> {
        self.require_full("the Q_H floor")?;
        Ok((0..self.nslots())
            .filter(|&s| self.low_weight[s] < 1.0)
            .map(|s| self.lambda[s])
            .fold(f64::INFINITY, f64::min))
    }

    /// Discrete surrogate `c₀ = floor/(1 + floor)` for the high-frequency energy estimate.
    pub fn c0_surrogate(&self) -> Result<f64> {
        let f = self.high_floor()?;
        Ok(f / (1.0 + f))
    }

    /// `sup χ(1 − χ)` over the box quasi-momenta (bounds the idempotency defect of `Q_L`).
    pub fn cutoff_transition(&self) -> f64 {
        self.cutoff.values.iter().map(|c| c * (1.0 - c)).fold(0.0, f64::max)
    }

    /// Duhamel formula `v(t) = e^{tL}v₀ + ∫₀ᵗ e^{(t−s)L}F(s) ds`, `L = (−α+i)A`, with the
    /// exponential-trapezoidal rule on the forcing nodes (exact for piecewise-linear `F`).
    /// `nodes` are `(s_j, F(s_j))` with `s₀ = 0` and ascending times; the result is at the last node.
    pub fn duhamel_apply(&self, v0: &SpectralField, nodes: &[(f64, SpectralField)], alpha: f64) -> Result<SpectralField> {
        self.require_full("the Duhamel integrator")?;
        if nodes.is_empty() || nodes[0].0 != 0.0 || nodes.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(HelixError::InvalidArgument("forcing nodes must start at 0 and increase".into()));
        }
        check_time(0.0, alpha)?;
        let k = C64::new(-alpha, 1.0);
        let mut v = self.to_eigen(&v0.coeffs)?;
        let mut f_prev = self.to_eigen(&nodes[0].1.coeffs)?;
        for w in nodes.windows(2) {
            let h = w[1].0 - w[0].0;
            let f_next = self.to_eigen(&w[1].1.coeffs)?;
            par::for_each_mut(&mut v, |s, x| {
                let z = k * self.lambda[s] * h;
                let (p1, p2) = phi12(z);
                *x = z.exp() * *x + (p1 - p2) * f_prev[s] * h + p2 * f_next[s] * h;
            });
            f_prev = f_next;
        }
        Ok(SpectralField { grid: v0.grid, coeffs: self.from_eigen(&v)? })
    }
}

fn check_time(t: f64, alpha: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(HelixError::InvalidArgument(format!("time t = {t} must be ≥ 0")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(HelixError::InvalidArgument(format!("damping α = {alpha} must be > 0")));
    }
    Ok(())
}

/// Fraction of `∫|f|²` carried by the outer strips (width [`tol::WRAP_STRIP`] of the box per
/// side) of every active axis. Fields centred in the box that spread into these strips are
/// about to wrap around.
pub fn boundary_mass_fraction(grid: &Grid, f: &[C64]) -> f64 {
    let total = par::sum(f.len(), |i| f[i].norm_sqr());
    if total == 0.0 {
        return 0.0;
    }
    let strip = par::sum(f.len(), |i| {
        let idx = grid.split(i);
        let edge = (0..grid.d).any(|a| {
            let p = idx[a] as f64 / grid.n[a] as f64;
            p < tol::WRAP_STRIP || p >= 1.0 - tol::WRAP_STRIP
        });
        if edge {
            f[i].norm_sqr()
        } else {
            0.0
        }
    });
    strip / total
}

/// Midpoint quadrature over the signed ξ-box `(−δ₀, δ₀)^d` for the kernel `G_L`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelQuadrature {
    /// Nodes per axis.
    pub nodes: usize,
    /// Truncation half-width of `A_ξ`.
    pub k_trunc: usize,
    pub delta0: f64,
    /// Imaginary coefficient ω of the exponent `t(−α + iω)λ₀`; the physical kernel has ω = 1.
    pub omega: f64,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        KernelQuadrature { nodes: 48, k_trunc: tol::K_ORACLE, delta0: tol::DELTA0_CUTOFF, omega: 1.0 }
    }
}

struct KernelNode {
    xi1: f64,
    perp: f64,
    weight: f64,
    lambda0: f64,
    /// `(k + ξ₁, c_k / √(2π))` pairs of `φ₀`.
    modes: Vec<(f64, C64)>,
}

/// Precomputed quadrature nodes for the d = 2 kernel `G_L`.
pub struct KernelTable {
    pub d: usize,
    pub quad: KernelQuadrature,
    nodes: Vec<KernelNode>,
    spacing: f64,
}

/// Value of `G_L` with a resolution flag.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelValue {
    pub value: C64,
    /// False when the integrand's phase changes by more than π/2 between quadrature nodes.
    pub resolved: bool,
}

impl KernelTable {
    pub fn new(d: usize, quad: KernelQuadrature) -> Result<Self> {
        if d != 2 || quad.nodes == 0 || !(quad.delta0 > 0.0 && quad.delta0 < 0.5) {
            return Err(HelixError::InvalidArgument(format!("kernel table: d = {d}, quadrature {quad:?}")));
        }
        let n = quad.nodes;
        let h = 2.0 * quad.delta0 / n as f64;
        let mid = |i: usize| -quad.delta0 + (i as f64 + 0.5) * h;
        let pts: Vec<(f64, f64)> = (0..n * n).map(|i| (mid(i % n), mid(i / n))).collect();
        let nodes = par::map_slice(&pts, |&(x1, x2)| -> Result<Option<KernelNode>> {
            let r = x1.hypot(x2);
            let chi = cutoff(r, quad.delta0);
            if chi <= 0.0 {
                return Ok(None);
            }
            let xi = BlochWavenumber::wrapped(2, x1, &[x2])?;
            let b = bands(xi, quad.k_trunc, 0)?;
            let kk = quad.k_trunc as i64;
            let norm = 1.0 / (2.0 * PI).sqrt();
            let modes = b.eigvecs[0]
                .iter()
                .enumerate()
                .map(|(i, c)| ((i as i64 - kk) as f64 + xi.xi1(), c * norm))
                .collect();
            Ok(Some(KernelNode { xi1: x1, perp: x2, weight: chi * h.powi(d as i32), lambda0: b.lambdas[0], modes }))
        });
        let nodes = nodes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
        Ok(KernelTable { d, quad, nodes, spacing: h })
    }

    fn bloch_wave(node: &KernelNode, x: [f64; 2]) -> C64 {
        let s: C64 = node.modes.iter().map(|&(q, c)| c * C64::from_polar(1.0, q * x[0])).sum();
        s * C64::from_polar(1.0, node.perp * x[1])
    }

    /// `G_L(t, x, y) = (2π)^{−(d−1)} ∫ e^{iξ·(x−y)} χ(ξ) e^{t(−α+iω)λ₀(ξ)} φ₀(ξ,x₁) conj(φ₀(ξ,y₁)) dξ`.
    pub fn kernel(&self, t: f64, alpha: f64, x: [f64; 2], y: [f64; 2]) -> Result<KernelValue> {
        check_time(t, alpha)?;
        let k = C64::new(-alpha, self.quad.omega) * t;
        let value: C64 = self
            .nodes
            .iter()
            .map(|n| Self::bloch_wave(n, x) * Self::bloch_wave(n, y).conj() * (k * n.lambda0).exp() * n.weight)
            .sum::<C64>()
            / (2.0 * PI);
        let dist = (x[0] - y[0]).abs().max((x[1] - y[1]).abs());
        let lmax = self.quad.delta0 * self.quad.delta0 * 2.0;
        let phase_step = self.spacing * (dist + t * self.quad.omega.abs() * 2.0 * lmax.sqrt());
        Ok(KernelValue { value, resolved: phase_step <= PI / 2.0 })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Signed ξ₁ of each node (exposed for diagnostics).
    pub fn node_xi1(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.xi1).collect()
    }
}

/// One-off evaluation of `G_L(t, x, y)`: d = 2 through a fresh [`KernelTable`], d = 1 through
/// the sharp-cutoff formula [`kernel_g_l_d1`] (using `quad.nodes` nodes; `x`, `y` use entry 0).
pub fn kernel_g_l(d: usize, t: f64, alpha: f64, x: [f64; 2], y: [f64; 2], quad: KernelQuadrature) -> Result<KernelValue> {
    if d == 1 {
        let value = kernel_g_l_d1(t, alpha, x[0], y[0], quad.nodes)?;
        let resolved = (2.0 / quad.nodes as f64) * ((x[0] - y[0]).abs() + 2.0 * t) <= PI / 2.0;
        return Ok(KernelValue { value, resolved });
    }
    KernelTable::new(d, quad)?.kernel(t, alpha, x, y)
}

/// The d = 1 kernel `(2π)⁻¹ ∫_{|ξ|≤1} e^{iξ(x−y)} e^{t(−α+i)ξ²} dξ` by the midpoint rule with
/// `nodes` points.
pub fn kernel_g_l_d1(t: f64, alpha: f64, x: f64, y: f64, nodes: usize) -> Result<C64> {
    check_time(t, alpha)?;
    if nodes == 0 {
        return Err(HelixError::InvalidArgument("kernel quadrature needs nodes > 0".into()));
    }
    let h = 2.0 / nodes as f64;
    let k = C64::new(-alpha, 1.0) * t;
    Ok((0..nodes)
        .map(|i| {
            let xi = -1.0 + (i as f64 + 0.5) * h;
            C64::from_polar(1.0, xi * (x - y)) * (k * xi * xi).exp()
        })
        .sum::<C64>()
        * h
        / (2.0 * PI))
}

/// One row of a kernel norm scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelScanRow {
    pub t: f64,
    pub norm: f64,
    pub expected_envelope: f64,
}

/// Norm exponent `p ∈ {2, ∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum NormP {
    Two,
    Inf,
}

impl NormP {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(NormP::Two),
            "inf" | "∞" => Ok(NormP::Inf),
            _ => Err(HelixError::InvalidArgument(format!("norm exponent {s:?} not in {{2, inf}}"))),
        }
    }

    pub fn inv(self) -> f64 {
        match self {
            NormP::Two => 0.5,
            NormP::Inf => 0.0,
        }
    }
}

/// Predicted decay exponent `−(d/2)(1 − 1/p) − k/2` of `‖∇^k e^{tL}Q_L v₀‖_{L^p}`.
pub fn expected_exponent(d: usize, p: NormP, k: usize) -> f64 {
    -(d as f64 / 2.0) * (1.0 - p.inv()) - k as f64 / 2.0
}

/// `‖∇^k f‖_{L^p}` on the box from coefficients, `k ∈ {0, 1}`, with `|∇f|` the pointwise
/// Euclidean norm of the gradient.
pub fn grad_norm(sp: &Spectral, c: &[C64], k: usize, p: NormP) -> Result<f64> {
    let g = sp.grid;
    let pointwise: Vec<f64> = match k {
        0 => sp.inverse(c).into_iter().map(|z| z.norm()).collect(),
        1 => {
            let comps: Vec<Vec<C64>> = (0..g.d).map(|a| sp.inverse(&sp.deriv(c, a))).collect();
            (0..g.npts()).map(|i| comps.iter().map(|v| v[i].norm_sqr()).sum::<f64>().sqrt()).collect()
        }
        _ => return Err(HelixError::InvalidArgument(format!("derivative order {k} not in {{0, 1}}"))),
    };
    Ok(match p {
        NormP::Two => (par::sum(pointwise.len(), |i| pointwise[i] * pointwise[i]) * g.cell_volume()).sqrt(),
        NormP::Inf => par::max(pointwise.len(), |i| pointwise[i]),
    })
}

/// Result of [`kernel_norm_scan`].
#[derive(Debug, Clone, Serialize)]
pub struct KernelScan {
    pub rows: Vec<KernelScanRow>,
    pub expected: f64,
    /// Boundary-mass fraction at each time (wrap-around diagnostic).
    pub boundary_fraction: Vec<f64>,
}

/// `sup_y ‖∇^k G_L(t,·,y)‖_{L^p}` on the box: `G_L(t,·,y) = e^{tL}Q_L δ_y` for a discrete
/// delta of unit mass; the supremum over `y` samples `y_samples` offsets of `y₁` across one
/// helix period around the box centre (translation invariance in the transverse directions).
pub fn kernel_norm_scan(
    cache: &PropagatorCache,
    times: &[f64],
    alpha: f64,
    p: NormP,
    k: usize,
    y_samples: usize,
) -> Result<KernelScan> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) || times[0] <= 0.0 {
        return Err(HelixError::InvalidArgument("times must be positive and ascending".into()));
    }
    let g = cache.grid();
    let sp = Spectral::new(g);
    let m = cache.layout.m;
    let ys = y_samples.clamp(1, m);
    let centre = [g.n[0] / 2, g.n[1] / 2, g.n[2] / 2];
    let mut norms = vec![0.0_f64; times.len()];
    let mut fractions = vec![0.0_f64; times.len()];
    for s in 0..ys {
        let i1 = centre[0] - centre[0] % m + s * m / ys;
        let mut delta = vec![C64::new(0.0, 0.0); g.npts()];
        delta[g.index([i1, centre[1], centre[2]])] = C64::new(1.0 / g.cell_volume(), 0.0);
        let f = SpectralField::from_values(&sp, &delta);
        for (j, &t) in times.iter().enumerate() {
            let v = cache.evolve_low(&f, t, alpha)?;
            norms[j] = norms[j].max(grad_norm(&sp, &v.coeffs, k, p)?);
            fractions[j] = fractions[j].max(boundary_mass_fraction(&g, &sp.inverse(&v.coeffs)));
        }
    }
    let expected = expected_exponent(g.d, p, k);
    let (t0, n0) = (times[0], norms[0]);
    let rows = times
        .iter()
        .zip(&norms)
        .map(|(&t, &norm)| KernelScanRow {
            t,
            norm,
            expected_envelope: n0 * ((1.0 + alpha * t) / (1.0 + alpha * t0)).powf(expected),
        })
        .collect();
    Ok(KernelScan { rows, expected, boundary_fraction: fractions })
}

/// Writes a kernel scan as CSV `t,norm,expected_envelope`.
pub fn write_kernel_csv<W: std::io::Write>(scan: &KernelScan, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,norm,expected_envelope")?;
    for r in &scan.rows {
        writeln!(out, "{},{},{}", crate::bloch::fmt17(r.t), crate::bloch::fmt17(r.norm), crate::bloch::fmt17(r.expected_envelope))?;
    }
    Ok(())
}

/// Sanity helper: the truncated operator used for a box block equals `A_ξ` restricted to the ladder.
pub fn block_operator_matches(layout: &BlockLayout, b: usize) -> Result<bool> {
    let xi = layout.xi[b];
    let op = assemble_operator(xi, layout.m.max(4))?;
    let k0 = layout.k_min[b];
    Ok((0..layout.m as i64).all(|i| {
        let k = k0 + i;
        k.unsigned_abs() as usize > op.k || (op.entry(k, k).re - ((k as f64 + xi.xi1()).powi(2) + xi.perp_norm().powi(2))).abs() < 1e-12
    }))
}
