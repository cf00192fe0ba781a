//! Helical states, the moving frame `{J₁, J₂, h}` and the two representations of a
//! perturbation `n = h + m`:
//!
//! * m-form: `m: ℝᵈ → ℝ³` with `|h + m| = 1`,
//! * u-form: `u = m·J₁ + i m·J₂` with `m = u₁J₁ + u₂J₂ + z h`, `z = −1 + √(1 − |u|²)`.
//!
//! Here `h = (0, cos x₁, sin x₁)`, `J₁ = (0, −sin x₁, cos x₁)`, `J₂ = (1, 0, 0)`, so that
//! `∂₁J₁ = −h`, `∂₁h = J₁`, `J₁ × J₂ = h` and `∇×h = −h`.

use crate::grid::{Grid, Spectral};
use crate::tolerances as tol;
use crate::{par, HelixError, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Three real component fields.
pub type VecField = [Vec<f64>; 3];

pub fn zeros_vec(n: usize) -> VecField {
    [vec![0.0; n], vec![0.0; n], vec![0.0; n]]
}

#[inline]
fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn at(f: &VecField, i: usize) -> [f64; 3] {
    [f[0][i], f[1][i], f[2][i]]
}

/// Helical state wavenumber κ > 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixParameter(f64);

impl HelixParameter {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa > 0.0 && kappa.is_finite() {
            Ok(HelixParameter(kappa))
        } else {
            Err(HelixError::InvalidArgument(format!("κ = {kappa} must be positive")))
        }
    }

    pub fn kappa(&self) -> f64 {
        self.0
    }
}

/// `h^κ = (0, cos κx₁, sin κx₁)` on the grid; rejects boxes with `κL₁/2π ∉ ℕ`.
pub fn helical_state(kappa: HelixParameter, grid: &Grid) -> Result<VecField> {
    grid.periods(kappa.kappa())?;
    let n = grid.npts();
    let mut h = zeros_vec(n);
    for i in 0..n {
        let x1 = grid.point(i)[0];
        let (s, c) = (kappa.kappa() * x1).sin_cos();
        h[1][i] = c;
        h[2][i] = s;
    }
    Ok(h)
}

/// The frame `{J₁, J₂, h}` of the κ = 1 helix on a commensurate grid.
#[derive(Debug, Clone)]
pub struct FrameBasis {
    pub grid: Grid,
    /// `cos x₁`, `sin x₁` per x₁ index.
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl FrameBasis {
    pub fn new(grid: Grid) -> Result<Self> {
        grid.n_per()?;
        let (sin, cos) = (0..grid.n[0]).map(|i| grid.coord(0, i).sin_cos()).unzip();
        Ok(FrameBasis { grid, cos, sin })
    }

    #[inline]
    pub fn cs(&self, idx: usize) -> (f64, f64) {
        let i1 = idx % self.grid.n[0];
        (self.cos[i1], self.sin[i1])
    }

    #[inline]
    pub fn h_at(&self, idx: usize) -> [f64; 3] {
        let (c, s) = self.cs(idx);
        [0.0, c, s]
    }

    #[inline]
    pub fn j1_at(&self, idx: usize) -> [f64; 3] {
        let (c, s) = self.cs(idx);
        [0.0, -s, c]
    }

    #[inline]
    pub fn j2_at(&self, _idx: usize) -> [f64; 3] {
        [1.0, 0.0, 0.0]
    }

    pub fn h(&self) -> VecField {
        self.field(|i| self.h_at(i))
    }

    pub fn j1(&self) -> VecField {
        self.field(|i| self.j1_at(i))
    }

    pub fn j2(&self) -> VecField {
        self.field(|i| self.j2_at(i))
    }

    fn field<F: Fn(usize) -> [f64; 3]>(&self, f: F) -> VecField {
        let n = self.grid.npts();
        let mut out = zeros_vec(n);
        for i in 0..n {
            let v = f(i);
            for k in 0..3 {
                out[k][i] = v[k];
            }
        }
        out
    }

    /// Maximum deviation from orthonormality and from `J₁ × J₂ = h`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.grid.npts();
        par::max(n, |i| {
            let (a, b, h) = (self.j1_at(i), self.j2_at(i), self.h_at(i));
            let g = [
                dot(a, a) - 1.0,
                dot(b, b) - 1.0,
                dot(h, h) - 1.0,
                dot(a, b),
                dot(a, h),
                dot(b, h),
            ];
            let c = cross(a, b);
            g.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max((0..3).map(|k| (c[k] - h[k]).abs()).fold(0.0, f64::max))
        })
    }
}

/// Which representation of a perturbation is authoritative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    M,
    U,
}

/// Paired m/u representations of a perturbation on a grid.
#[derive(Debug, Clone)]
pub struct PerturbationFields {
    pub m: VecField,
    pub u: Vec<C64>,
    pub z: Vec<f64>,
    pub authoritative: Representation,
}

impl PerturbationFields {
    pub fn zero(grid: &Grid, rep: Representation) -> Self {
        let n = grid.npts();
        PerturbationFields { m: zeros_vec(n), u: vec![C64::new(0.0, 0.0); n], z: vec![0.0; n], authoritative: rep }
    }

    pub fn sup_u(&self) -> f64 {
        sup_abs(&self.u)
    }

    /// `max ||h + m| − 1|`.
    pub fn sphere_defect(&self, frame: &FrameBasis) -> f64 {
        sphere_defect(&self.m, frame)
    }
}

pub fn sup_abs(u: &[C64]) -> f64 {
    par::max(u.len(), |i| u[i].norm())
}

/// `max ||h + m| − 1|` over the grid.
pub fn sphere_defect(m: &VecField, frame: &FrameBasis) -> f64 {
    par::max(m[0].len(), |i| {
        let h = frame.h_at(i);
        let n = [h[0] + m[0][i], h[1] + m[1][i], h[2] + m[2][i]];
        (dot(n, n).sqrt() - 1.0).abs()
    })
}

/// `z = −1 + √(1 − |u|²)`, evaluated as `−|u|²/(1 + √(1 − |u|²))` to avoid cancellation.
#[inline]
pub fn z_of(u: C64) -> f64 {
    let a = u.norm_sqr();
    -a / (1.0 + (1.0 - a).sqrt())
}

fn check_small(u: &[C64]) -> Result<()> {
    let s = sup_abs(u);
    if s > tol::SMALLNESS || !s.is_finite() {
        return Err(HelixError::SmallnessViolated { sup_u: s });
    }
    Ok(())
}

/// Builds `m = u₁J₁ + u₂J₂ + z h`; rejects `sup|u| > ½`.
pub fn u_to_m(u: &[C64], frame: &FrameBasis) -> Result<PerturbationFields> {
    check_small(u)?;
    let n = u.len();
    let z: Vec<f64> = u.iter().map(|&w| z_of(w)).collect();
    let mut m = zeros_vec(n);
    for i in 0..n {
        let (j1, h) = (frame.j1_at(i), frame.h_at(i));
        m[0][i] = u[i].im;
        m[1][i] = u[i].re * j1[1] + z[i] * h[1];
        m[2][i] = u[i].re * j1[2] + z[i] * h[2];
    }
    Ok(PerturbationFields { m, u: u.to_vec(), z, authoritative: Representation::U })
}

/// `u = m·J₁ + i m·J₂`; rejects `||h+m| − 1| > 1e−8` and `sup|u| > ½`.
pub fn m_to_u(m: &VecField, frame: &FrameBasis) -> Result<Vec<C64>> {
    let defect = sphere_defect(m, frame);
    if defect > tol::SPHERE_INPUT || !defect.is_finite() {
        return Err(HelixError::ConstraintViolated { defect });
    }
    let u: Vec<C64> = (0..m[0].len())
        .map(|i| {
            let v = at(m, i);
            C64::new(dot(v, frame.j1_at(i)), dot(v, frame.j2_at(i)))
        })
        .collect();
    check_small(&u)?;
    Ok(u)
}

/// Synchronised fields from an authoritative m (z taken as `m·h`).
pub fn fields_from_m(m: VecField, frame: &FrameBasis) -> Result<PerturbationFields> {
    let u = m_to_u(&m, frame)?;
    let z = (0..u.len()).map(|i| dot(at(&m, i), frame.h_at(i))).collect();
    Ok(PerturbationFields { m, u, z, authoritative: Representation::M })
}

/// Spectral first derivatives `d[k][j] = ∂_j m_k` and Laplacians `Δm_k`.
struct VecDerivs {
    d: [[Vec<f64>; 3]; 3],
    lap: VecField,
}

fn vec_derivs(m: &VecField, sp: &Spectral) -> VecDerivs {
    let n = sp.grid.npts();
    let dim = sp.grid.d;
    let mut d: [[Vec<f64>; 3]; 3] = Default::default();
    let mut lap = zeros_vec(n);
    for k in 0..3 {
        let c = sp.forward_real(&m[k]);
        for j in 0..3 {
            d[k][j] = if j < dim { sp.inverse_real(&sp.deriv(&c, j)) } else { vec![0.0; n] };
        }
        lap[k] = sp.inverse_real(&sp.laplacian(&c));
    }
    VecDerivs { d, lap }
}

impl VecDerivs {
    #[inline]
    fn curl(&self, i: usize) -> [f64; 3] {
        let d = &self.d;
        [d[2][1][i] - d[1][2][i], d[0][2][i] - d[2][0][i], d[1][0][i] - d[0][1][i]]
    }

    #[inline]
    fn grad_sq(&self, i: usize) -> f64 {
        self.d.iter().flat_map(|dk| dk.iter()).map(|v| v[i] * v[i]).sum()
    }
}

/// Spectral curl of a vector field.
pub fn curl(m: &VecField, sp: &Spectral) -> VecField {
    let dv = vec_derivs(m, sp);
    let n = sp.grid.npts();
    let mut out = zeros_vec(n);
    for i in 0..n {
        let c = dv.curl(i);
        for k in 0..3 {
            out[k][i] = c[k];
        }
    }
    out
}

/// Spectral divergence.
pub fn divergence(m: &VecField, sp: &Spectral) -> Vec<f64> {
    let dv = vec_derivs(m, sp);
    (0..sp.grid.npts()).map(|i| dv.d[0][0][i] + dv.d[1][1][i] + dv.d[2][2][i]).collect()
}

/// Spectral vector Laplacian.
pub fn vector_laplacian(m: &VecField, sp: &Spectral) -> VecField {
    vec_derivs(m, sp).lap
}

fn gamma_from(m: &VecField, dv: &VecDerivs, frame: &FrameBasis, i: usize) -> [f64; 3] {
    let h = frame.h_at(i);
    let dh1 = frame.j1_at(i); // ∂₁h
    let mi = at(m, i);
    let dm1 = [dv.d[0][0][i], dv.d[1][0][i], dv.d[2][0][i]];
    let curl_h = [-h[0], -h[1], -h[2]];
    let curl_m = dv.curl(i);
    let bracket = 2.0 * dot(dh1, dm1) + dot(curl_h, mi) + dot(curl_m, h) + dv.grad_sq(i) + dot(curl_m, mi);
    [bracket * (h[0] + mi[0]), bracket * (h[1] + mi[1]), bracket * (h[2] + mi[2])]
}

/// `Γ(m) = (2∇h:∇m + ∇×h·m + ∇×m·h + |∇m|² + ∇×m·m)(h + m)`.
pub fn gamma_term(m: &VecField, sp: &Spectral, frame: &FrameBasis) -> VecField {
    let dv = vec_derivs(m, sp);
    let n = sp.grid.npts();
    let mut out = zeros_vec(n);
    for i in 0..n {
        let g = gamma_from(m, &dv, frame, i);
        for k in 0..3 {
            out[k][i] = g[k];
        }
    }
    out
}

/// `(α − h×)(Δm − ∇×m) + m × (−Δm + ∇×m) + αΓ(m)`.
pub fn rhs_m(m: &VecField, alpha: f64, sp: &Spectral, frame: &FrameBasis) -> VecField {
    let dv = vec_derivs(m, sp);
    let n = sp.grid.npts();
    let mut out = zeros_vec(n);
    let vals: Vec<[f64; 3]> = par::map_range(n, |i| {
        let h = frame.h_at(i);
        let mi = at(m, i);
        let c = dv.curl(i);
        let w = [dv.lap[0][i] - c[0], dv.lap[1][i] - c[1], dv.lap[2][i] - c[2]];
        let hw = cross(h, w);
        let mw = cross(mi, w);
        let g = gamma_from(m, &dv, frame, i);
        std::array::from_fn(|k| alpha * w[k] - hw[k] - mw[k] + alpha * g[k])
    });
    for (i, v) in vals.into_iter().enumerate() {
        for k in 0..3 {
            out[k][i] = v[k];
        }
    }
    out
}

/// Right-hand side of the full LLG equation
/// `n × (−Δn + ∇×n) + α(Δn − ∇×n + (|∇n|² + (∇×n)·n) n)`.
pub fn llg_rhs(nf: &VecField, alpha: f64, sp: &Spectral) -> VecField {
    let dv = vec_derivs(nf, sp);
    let n = sp.grid.npts();
    let mut out = zeros_vec(n);
    for i in 0..n {
        let v = at(nf, i);
        let c = dv.curl(i);
        let e = [-dv.lap[0][i] + c[0], -dv.lap[1][i] + c[1], -dv.lap[2][i] + c[2]];
        let x = cross(v, e);
        let lam = dv.grad_sq(i) + dot(c, v);
        for k in 0..3 {
            out[k][i] = x[k] + alpha * (-e[k] + lam * v[k]);
        }
    }
    out
}

/// Spectral derivatives of a complex field: `∂_j u` for all three axes (zero beyond `d`) and `Δu`.
pub(crate) struct ScalarDerivs {
    pub d: [Vec<C64>; 3],
    pub lap: Vec<C64>,
}

pub(crate) fn scalar_derivs(c: &[C64], sp: &Spectral) -> ScalarDerivs {
    let n = sp.grid.npts();
    let dim = sp.grid.d;
    let d = std::array::from_fn(|j| {
        if j < dim {
            sp.inverse(&sp.deriv(c, j))
        } else {
            vec![C64::new(0.0, 0.0); n]
        }
    });
    ScalarDerivs { d, lap: sp.inverse(&sp.laplacian(c)) }
}

/// `A u = −Δu + i cos x₁ ∂₂u + i sin x₁ ∂₃u` in physical space.
pub fn apply_a(u: &[C64], sp: &Spectral, frame: &FrameBasis) -> Vec<C64> {
    let du = scalar_derivs(&sp.forward(u), sp);
    let i_ = C64::new(0.0, 1.0);
    (0..u.len())
        .map(|i| {
            let (c, s) = frame.cs(i);
            -du.lap[i] + i_ * (du.d[1][i] * c + du.d[2][i] * s)
        })
        .collect()
}

/// The nonlinear terms `N₁`, `N₂` of the u-equation.
#[derive(Debug, Clone)]
pub struct NonlinearTerms {
    pub n1: Vec<C64>,
    pub n2: Vec<C64>,
}

/// Everything `rhs_u` needs at one grid point.
struct Pointwise {
    au: C64,
    n1: C64,
    n2: C64,
}

fn pointwise_terms(u: &[C64], du: &ScalarDerivs, z: &[f64], dz: &ScalarDerivs, frame: &FrameBasis, i: usize) -> Pointwise {
    let i_ = C64::new(0.0, 1.0);
    let (c, s) = frame.cs(i);
    let w = u[i];
    let (u1, u2) = (w.re, w.im);
    let zi = z[i];
    let (d1u, d2u, d3u) = (du.d[0][i], du.d[1][i], du.d[2][i]);
    let (d1z, d2z, d3z) = (dz.d[0][i].re, dz.d[1][i].re, dz.d[2][i].re);
    let lapz = dz.lap[i].re;
    let lapu = du.lap[i];
    let grad_u2 = d1u.norm_sqr() + d2u.norm_sqr() + d3u.norm_sqr();
    let grad_z2 = d1z * d1z + d2z * d2z + d3z * d3z;
    let au = -lapu + i_ * (d2u * c + d3u * s);
    let bracket = d1u.re - d2u.im * s + d3u.im * c
        + grad_u2
        + grad_z2
        + (u2 * d2u.re - u1 * d2u.im) * c
        + (u2 * d3u.re - u1 * d3u.im) * s
        + zi * d1u.re
        - u1 * d1z
        + (u2 * d2z - zi * d2u.im) * s
        + (zi * d3u.im - u2 * d3z) * c;
    let n1 = C64::new(d1z, 0.0) + i_ * (-d2z * s + d3z * c) + w * bracket;
    let n2 = -i_ * d1z - d2z * s + d3z * c + i_ * w * (lapz - d1u.re + d2u.im * s - d3u.im * c)
        - zi * (i_ * lapu + d2u * c + d3u * s + d2z * s - d3z * c + i_ * d1z);
    Pointwise { au, n1, n2 }
}

fn u_and_z_derivs(u: &[C64], sp: &Spectral) -> (ScalarDerivs, Vec<f64>, ScalarDerivs) {
    let du = scalar_derivs(&sp.forward(u), sp);
    let z: Vec<f64> = u.iter().map(|&w| z_of(w)).collect();
    let dz = scalar_derivs(&sp.forward_real(&z), sp);
    (du, z, dz)
}

/// `N₁(u, ∇u)` and `N₂(u, ∇u, ∇²u)`, all derivatives spectral.
pub fn nonlinear_terms(u: &[C64], sp: &Spectral, frame: &FrameBasis) -> Result<NonlinearTerms> {
    check_small(u)?;
    let (du, z, dz) = u_and_z_derivs(u, sp);
    let pts: Vec<Pointwise> = par::map_range(u.len(), |i| pointwise_terms(u, &du, &z, &dz, frame, i));
    Ok(NonlinearTerms { n1: pts.iter().map(|p| p.n1).collect(), n2: pts.iter().map(|p| p.n2).collect() })
}

/// `αN₁ + N₂` only (the nonlinear part of the u-equation).
pub fn nonlinearity_u(u: &[C64], alpha: f64, sp: &Spectral, frame: &FrameBasis) -> Result<Vec<C64>> {
    check_small(u)?;
    let (du, z, dz) = u_and_z_derivs(u, sp);
    Ok(par::map_range(u.len(), |i| {
        let p = pointwise_terms(u, &du, &z, &dz, frame, i);
        p.n1 * alpha + p.n2
    }))
}

/// `(−α + i) A u + α N₁ + N₂`.
pub fn rhs_u(u: &[C64], alpha: f64, sp: &Spectral, frame: &FrameBasis) -> Result<Vec<C64>> {
    check_small(u)?;
    let (du, z, dz) = u_and_z_derivs(u, sp);
    let k = C64::new(-alpha, 1.0);
    Ok(par::map_range(u.len(), |i| {
        let p = pointwise_terms(u, &du, &z, &dz, frame, i);
        k * p.au + p.n1 * alpha + p.n2
    }))
}

/// Projects a vector field onto `J₁ + iJ₂`.
pub fn project_to_u(v: &VecField, frame: &FrameBasis) -> Vec<C64> {
    (0..v[0].len())
        .map(|i| {
            let x = at(v, i);
            C64::new(dot(x, frame.j1_at(i)), dot(x, frame.j2_at(i)))
        })
        .collect()
}

/// Smooth random u-field: a few random Fourier modes per active axis, rescaled so that
/// `sup|u| = sup`. Deterministic in `seed`.
pub fn random_smooth_u(grid: &Grid, seed: u64, sup: f64, max_mode: i64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.d;
    let modes: Vec<([i64; 3], C64)> = {
        let mut v = Vec::new();
        let r = |a: usize| if a < d { -max_mode..=max_mode } else { 0..=0 };
        for k1 in r(0) {
            for k2 in r(1) {
                for k3 in r(2) {
                    let amp = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                        / (1.0 + (k1 * k1 + k2 * k2 + k3 * k3) as f64);
                    v.push(([k1, k2, k3], amp));
                }
            }
        }
        v
    };
    let u: Vec<C64> = (0..grid.npts())
        .map(|i| {
            let p = grid.point(i);
            modes
                .iter()
                .map(|(k, a)| {
                    let ph: f64 = (0..3).map(|ax| 2.0 * std::f64::consts::PI * k[ax] as f64 * p[ax] / grid.len[ax]).sum();
                    a * C64::from_polar(1.0, ph)
                })
                .sum()
        })
        .collect();
    let s = sup_abs(&u);
    u.into_iter().map(|w| w * (sup / s)).collect()
}

/// Relative master-identity defect `‖rhs_m(u→m)·(J₁+iJ₂) − rhs_u(u)‖_∞ / ‖rhs_u(u)‖_∞`.
pub fn master_identity_defect(u: &[C64], alpha: f64, sp: &Spectral, frame: &FrameBasis) -> Result<f64> {
    let f = u_to_m(u, frame)?;
    let proj = project_to_u(&rhs_m(&f.m, alpha, sp, frame), frame);
    let ru = rhs_u(u, alpha, sp, frame)?;
    let num = (0..u.len()).map(|i| (proj[i] - ru[i]).norm()).fold(0.0, f64::max);
    let den = sup_abs(&ru).max(f64::MIN_POSITIVE);
    Ok(num / den)
}
