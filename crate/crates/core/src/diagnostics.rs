//! Norms, the bootstrap functionals `M_L`/`M_H`, decay fits and energy identities.
//!
//! Conventions on the box: `L^p` norms use the grid quadrature with the pointwise
//! Euclidean norm of vector/complex values; `H^s` norms use the Fourier multiplier
//! `(1+|q|²)^{s/2}`; `W^{s,p}` norms are `(Σ_{|β|≤s} ‖∂^β f‖_p²)^{1/2}`.

use crate::frame::{self, FrameBasis, PerturbationFields, VecField};
use crate::grid::{Grid, Spectral, SpectralField};
use crate::propagator::PropagatorCache;
use crate::tolerances as tol;
use crate::{par, HelixError, Result, C64};
use serde::{Deserialize, Serialize};

/// Multi-indices `β` with `|β| = order` over the first `d` axes.
pub fn multi_indices(d: usize, order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..=order {
        for b in 0..=order - a {
            let c = order - a - b;
            let beta = [a, b, c];
            if (0..3).all(|ax| ax < d || beta[ax] == 0) {
                out.push(beta);
            }
        }
    }
    out
}

/// Coefficients of `∂^β f`.
pub fn partial(sp: &Spectral, c: &[C64], beta: [usize; 3]) -> Vec<C64> {
    let i = C64::new(0.0, 1.0);
    let g = sp.grid;
    let mut out = c.to_vec();
    par::for_each_mut(&mut out, |idx, x| {
        let [j1, j2, j3] = g.split(idx);
        let js = [j1, j2, j3];
        let mut f = C64::new(1.0, 0.0);
        for ax in 0..3 {
            if beta[ax] > 0 {
                let q = if g.is_nyquist(ax, js[ax]) { 0.0 } else { sp.q[ax][js[ax]] };
                f *= (i * q).powi(beta[ax] as i32);
            }
        }
        *x *= f;
    });
    out
}

/// Norms of a multi-component field given by its coefficients.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub hs: f64,
    pub ws_inf: f64,
}

fn pointwise_norm(values: &[Vec<C64>]) -> Vec<f64> {
    let n = values[0].len();
    par::map_range(n, |i| values.iter().map(|v| v[i].norm_sqr()).sum::<f64>().sqrt())
}

/// `‖f‖_{H^s}² = Vol Σ (1+|q|²)^s |c_q|²` summed over components.
pub fn hs_norm(sp: &Spectral, comps: &[Vec<C64>], s: f64) -> f64 {
    let vol = sp.grid.volume();
    comps
        .iter()
        .map(|c| par::sum(c.len(), |i| (1.0 + sp.q2(i)).powf(s) * c[i].norm_sqr()))
        .sum::<f64>()
        .sqrt()
        * vol.sqrt()
}

/// `‖∇f‖_{H^s}² = Vol Σ |q|²(1+|q|²)^s |c_q|²` (Nyquist modes excluded, as in the derivative).
pub fn grad_hs_norm(sp: &Spectral, comps: &[Vec<C64>], s: f64) -> f64 {
    let g = sp.grid;
    let vol = g.volume();
    comps
        .iter()
        .map(|c| {
            par::sum(c.len(), |i| {
                let js = g.split(i);
                let q2: f64 = (0..g.d).map(|a| if g.is_nyquist(a, js[a]) { 0.0 } else { sp.q[a][js[a]].powi(2) }).sum();
                q2 * (1.0 + sp.q2(i)).powf(s) * c[i].norm_sqr()
            })
        })
        .sum::<f64>()
        .sqrt()
        * vol.sqrt()
}

/// `‖f‖_{W^{k,p}}` for `p ∈ {2, ∞}` from coefficients (all components jointly).
pub fn wkp_norm(sp: &Spectral, comps: &[Vec<C64>], k: usize, p_inf: bool) -> f64 {
    let d = sp.grid.d;
    let cell = sp.grid.cell_volume();
    let mut total = 0.0;
    for order in 0..=k {
        for beta in multi_indices(d, order) {
            let vals: Vec<Vec<C64>> = comps.iter().map(|c| sp.inverse(&partial(sp, c, beta))).collect();
            let pw = pointwise_norm(&vals);
            let v = if p_inf {
                par::max(pw.len(), |i| pw[i])
            } else {
                (par::sum(pw.len(), |i| pw[i] * pw[i]) * cell).sqrt()
            };
            total += v * v;
        }
    }
    total.sqrt()
}

/// `‖∇f‖_{W^{s,∞}}² = Σ_{|β|≤s} ‖∂^β∇f‖_∞²` with the pointwise norm over gradient and components.
pub fn grad_ws_inf_norm(sp: &Spectral, comps: &[Vec<C64>], s: usize) -> f64 {
    let d = sp.grid.d;
    let mut total = 0.0;
    for order in 0..=s {
        for beta in multi_indices(d, order) {
            let mut vals = Vec::new();
            for c in comps {
                for a in 0..d {
                    let mut b = beta;
                    b[a] += 1;
                    vals.push(sp.inverse(&partial(sp, c, b)));
                }
            }
            let pw = pointwise_norm(&vals);
            let v = par::max(pw.len(), |i| pw[i]);
            total += v * v;
        }
    }
    total.sqrt()
}

/// `⌊s − (d+1)/2⌋`, clamped at 0.
pub fn w_index(s: usize, d: usize) -> usize {
    let v = s as f64 - (d as f64 + 1.0) / 2.0;
    if v <= 0.0 {
        0
    } else {
        v.floor() as usize
    }
}

/// All norms of a field given by component coefficients.
pub fn field_norms(sp: &Spectral, comps: &[Vec<C64>], s: usize) -> FieldNorms {
    let vals: Vec<Vec<C64>> = comps.iter().map(|c| sp.inverse(c)).collect();
    let pw = pointwise_norm(&vals);
    let cell = sp.grid.cell_volume();
    FieldNorms {
        l1: par::sum(pw.len(), |i| pw[i]) * cell,
        l2: (par::sum(pw.len(), |i| pw[i] * pw[i]) * cell).sqrt(),
        linf: par::max(pw.len(), |i| pw[i]),
        hs: hs_norm(sp, comps, s as f64),
        ws_inf: wkp_norm(sp, comps, w_index(s, sp.grid.d), true),
    }
}

/// Norms of one snapshot (of `m`, plus `sup|u|`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub hs: f64,
    pub ws_inf: f64,
    pub sup_u: f64,
}

impl NormReport {
    /// `L2 ≤ sqrt(L1 · Linf)` (up to rounding).
    pub fn interpolation_ok(&self) -> bool {
        self.l2 <= (self.l1 * self.linf).sqrt() * (1.0 + 1e-12) + 1e-300
    }

    pub fn is_valid(&self) -> bool {
        [self.l1, self.l2, self.linf, self.hs, self.ws_inf, self.sup_u].iter().all(|x| *x >= 0.0 && x.is_finite())
    }
}

/// Norms of the perturbation `m` at time `t`.
pub fn norms(fields: &PerturbationFields, sp: &Spectral, s: usize, t: f64) -> NormReport {
    let comps: Vec<Vec<C64>> = fields.m.iter().map(|c| sp.forward_real(c)).collect();
    let f = field_norms(sp, &comps, s);
    NormReport { t, l1: f.l1, l2: f.l2, linf: f.linf, hs: f.hs, ws_inf: f.ws_inf, sup_u: fields.sup_u() }
}

/// Least-squares power-law fit `value ≈ prefactor · (1+αt)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    pub window: [f64; 2],
    pub samples: usize,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    (slope, icpt, rms)
}

fn window_points(series: &[(f64, f64)], window: [f64; 2]) -> Result<Vec<(f64, f64)>> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= window[0] && *t <= window[1]).collect();
    if pts.len() < tol::FIT_MIN_SAMPLES {
        return Err(HelixError::FitRejected(format!(
            "{} samples in window [{}, {}] (need {})",
            pts.len(),
            window[0],
            window[1],
            tol::FIT_MIN_SAMPLES
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(HelixError::FitRejected(format!("nonpositive value {v} at t = {t}")));
    }
    Ok(pts)
}

/// Slope of `log(value)` against `log(1+αt)` over `window`.
pub fn fit_decay(series: &[(f64, f64)], alpha: f64, window: [f64; 2]) -> Result<DecayFit> {
    if !(alpha > 0.0) {
        return Err(HelixError::InvalidArgument(format!("α = {alpha} must be > 0")));
    }
    let pts = window_points(series, window)?;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| (alpha * t).ln_1p()).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let (slope, icpt, rms) = least_squares(&xs, &ys);
    Ok(DecayFit { exponent: slope, prefactor: icpt.exp(), residual: rms, window, samples: pts.len() })
}

/// Exponential fit `value ≈ prefactor · e^{−rate·t}`; returns `(rate, fit)`.
pub fn fit_exponential(series: &[(f64, f64)], window: [f64; 2]) -> Result<(f64, DecayFit)> {
    let pts = window_points(series, window)?;
    let xs: Vec<f64> = pts.iter().map(|(t, _)| *t).collect();
    let ys: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let (slope, icpt, rms) = least_squares(&xs, &ys);
    Ok((-slope, DecayFit { exponent: slope, prefactor: icpt.exp(), residual: rms, window, samples: pts.len() }))
}

/// Default fit window `[2/α, 0.8·t_wrap]` (`t_end` when no wrap-around was detected).
pub fn default_window(alpha: f64, t_wrap: Option<f64>, t_end: f64) -> [f64; 2] {
    [tol::FIT_START_ALPHA_T / alpha, t_wrap.map_or(t_end, |t| tol::FIT_END_WRAP * t)]
}

/// First time at which the boundary-mass fraction exceeds [`tol::WRAP_FRACTION`] while increasing.
pub fn wrap_time(series: &[(f64, f64)]) -> Option<f64> {
    series.windows(2).find(|w| w[1].1 > tol::WRAP_FRACTION && w[1].1 > w[0].1).map(|w| w[1].0)
}

/// Per-snapshot ingredients of `M_L` and `M_H`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MSample {
    pub t: f64,
    pub ul_l2: f64,
    pub grad_ul_hs: f64,
    pub ul_linf: f64,
    pub grad_ul_ws_inf: f64,
    pub uh_hs: f64,
    pub uh_hs1: f64,
}

/// Splits `u` into `u_L = Q_L u`, `u_H = Q_H u` and evaluates the norms entering `M`.
pub fn m_sample(u: &[C64], t: f64, s: usize, sp: &Spectral, cache: &PropagatorCache) -> Result<MSample> {
    let f = SpectralField::from_values(sp, u);
    let low = cache.project_low(&f)?.coeffs;
    let high: Vec<C64> = f.coeffs.iter().zip(&low).map(|(a, b)| a - b).collect();
    let lo = [low];
    let hi = [high];
    Ok(MSample {
        t,
        ul_l2: hs_norm(sp, &lo, 0.0),
        grad_ul_hs: grad_hs_norm(sp, &lo, s as f64),
        ul_linf: wkp_norm(sp, &lo, 0, true),
        grad_ul_ws_inf: grad_ws_inf_norm(sp, &lo, s),
        uh_hs: hs_norm(sp, &hi, s as f64),
        uh_hs1: hs_norm(sp, &hi, s as f64 + 1.0),
    })
}

/// The bootstrap functionals evaluated from snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MFunctionals {
    pub m_l: f64,
    pub m_h: f64,
    pub m: f64,
    pub window: [f64; 2],
    /// Time at which the supremum of `M_H` is attained.
    pub m_h_argsup: f64,
    pub c0: f64,
}

/// `M_L`, `M_H` and the running bound `M(t)` at every snapshot (trapezoidal time quadrature for
/// the `e^{−c₀α(t−τ)}`-weighted integral).
pub fn m_functionals_series(samples: &[MSample], alpha: f64, d: usize, c0: f64) -> Result<Vec<MFunctionals>> {
    if samples.is_empty() {
        return Err(HelixError::InvalidArgument("no snapshots".into()));
    }
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(HelixError::InvalidArgument("snapshot times must increase".into()));
    }
    let dd = d as f64;
    let mut out = Vec::with_capacity(samples.len());
    let (mut ml, mut mh, mut arg) = (0.0_f64, 0.0_f64, samples[0].t);
    let mut integral = 0.0;
    for (j, s) in samples.iter().enumerate() {
        if j > 0 {
            let h = s.t - samples[j - 1].t;
            let decay = (-c0 * alpha * h).exp();
            integral = decay * integral + 0.5 * h * (decay * samples[j - 1].uh_hs1.powi(2) + s.uh_hs1.powi(2));
        }
        let w = 1.0 + alpha * s.t;
        let l = w.powf(dd / 4.0) * s.ul_l2
            + w.powf(dd / 4.0 + 0.5) * s.grad_ul_hs
            + w.powf(dd / 2.0) * s.ul_linf
            + w.powf(dd / 2.0 + 0.5) * s.grad_ul_ws_inf;
        let hterm = w.powf(dd / 2.0 + 1.0) * (s.uh_hs + alpha.sqrt() * integral.sqrt());
        ml = ml.max(l);
        if hterm > mh {
            mh = hterm;
            arg = s.t;
        }
        out.push(MFunctionals { m_l: ml, m_h: mh, m: ml + mh, window: [samples[0].t, s.t], m_h_argsup: arg, c0 });
    }
    Ok(out)
}

/// `M(T)` at the last snapshot.
pub fn m_functionals(samples: &[MSample], alpha: f64, d: usize, c0: f64) -> Result<MFunctionals> {
    Ok(*m_functionals_series(samples, alpha, d, c0)?.last().expect("non-empty"))
}

/// Energy quantities of a perturbed helix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `E[h+m] − E[h]` on the box.
    pub total_relative_energy: f64,
    /// `⟨Au, u⟩` (per-block eigen-expansion).
    pub hessian_quadratic: f64,
    /// `total_relative_energy / (½⟨Au,u⟩)`.
    pub hessian_ratio: f64,
    /// `max_x |density − bulk form|` of the energy-density identity (pointwise).
    pub bulk_identity_defect: f64,
    /// `|∫ density − ∫ bulk form|` (divergence term integrated away).
    pub bulk_integrated_defect: f64,
}

/// `E[n] = ½∫|∇n|² + ½∫n·∇×n` on the box.
pub fn energy(n: &VecField, sp: &Spectral) -> f64 {
    let d = sp.grid.d;
    let grads: Vec<Vec<Vec<f64>>> = n.iter().map(|c| sp.grad_real(c)).collect();
    let curl = frame::curl(n, sp);
    let npts = sp.grid.npts();
    par::sum(npts, |i| {
        let g2: f64 = (0..3).map(|k| (0..d).map(|a| grads[k][a][i].powi(2)).sum::<f64>()).sum();
        let nc: f64 = (0..3).map(|k| n[k][i] * curl[k][i]).sum();
        0.5 * g2 + 0.5 * nc
    }) * sp.grid.cell_volume()
}

/// Pointwise and integrated defect of
/// `½|∇n|² + ½n·∇×n = ½(|∇×n + ½n|² + (∇·n)²) − ⅛ + ½∇·((n·∇)n − n(∇·n))` for a unit field,
/// with every derivative (including the outer divergence) taken spectrally.
pub fn bulk_identity_defect(n: &VecField, sp: &Spectral) -> (f64, f64) {
    let g = sp.grid;
    let d = g.d;
    let npts = g.npts();
    let grads: Vec<Vec<Vec<f64>>> = n.iter().map(|c| sp.grad_real(c)).collect();
    let dn = |k: usize, a: usize, i: usize| if a < d { grads[k][a][i] } else { 0.0 };
    let curl = frame::curl(n, sp);
    let div = frame::divergence(n, sp);
    // V = (n·∇)n − n(∇·n)
    let v: VecField = std::array::from_fn(|k| {
        (0..npts).map(|i| (0..3).map(|a| n[a][i] * dn(k, a, i)).sum::<f64>() - n[k][i] * div[i]).collect()
    });
    let div_v = frame::divergence(&v, sp);
    let defects: Vec<f64> = par::map_range(npts, |i| {
        let g2: f64 = (0..3).map(|k| (0..3).map(|a| dn(k, a, i).powi(2)).sum::<f64>()).sum();
        let nc: f64 = (0..3).map(|k| n[k][i] * curl[k][i]).sum();
        let lhs = 0.5 * g2 + 0.5 * nc;
        let b: f64 = (0..3).map(|k| (curl[k][i] + 0.5 * n[k][i]).powi(2)).sum();
        let rhs = 0.5 * (b + div[i] * div[i]) - 0.125 + 0.5 * div_v[i];
        lhs - rhs
    });
    let pointwise = defects.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    // Integrated: drop the divergence term, which integrates to zero on the box.
    let integrated = (par::sum(npts, |i| defects[i] + 0.5 * div_v[i]) * g.cell_volume()).abs();
    (pointwise, integrated)
}

/// `(max|∇×h + ½h|, max|∇·h|)` for `h^{1/2}` on a box of an even number of helix periods.
pub fn half_helix_residuals(grid: &Grid) -> Result<(f64, f64)> {
    let h = frame::helical_state(frame::HelixParameter::new(0.5)?, grid)?;
    let sp = Spectral::new(*grid);
    let c = frame::curl(&h, &sp);
    let div = frame::divergence(&h, &sp);
    let r = (0..grid.npts())
        .map(|i| (0..3).map(|k| (c[k][i] + 0.5 * h[k][i]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok((r, div.iter().fold(0.0_f64, |m, x| m.max(x.abs()))))
}

/// Energy report for synchronised perturbation fields of the κ = 1 helix.
pub fn energy_report(fields: &PerturbationFields, sp: &Spectral, frame: &FrameBasis, cache: &PropagatorCache) -> Result<EnergyReport> {
    let h = frame.h();
    let n: VecField = std::array::from_fn(|k| h[k].iter().zip(&fields.m[k]).map(|(a, b)| a + b).collect());
    let e = energy(&n, sp) - energy(&h, sp);
    let q = cache.a_quadratic(&SpectralField::from_values(sp, &fields.u))?;
    let (pw, integ) = bulk_identity_defect(&n, sp);
    Ok(EnergyReport {
        total_relative_energy: e,
        hessian_quadratic: q,
        hessian_ratio: if q > 0.0 { e / (0.5 * q) } else { f64::NAN },
        bulk_identity_defect: pw,
        bulk_integrated_defect: integ,
    })
}

/// Ratios of the frame norm-equivalence battery for one `u`:
/// `‖m‖/(‖u‖ + ‖u‖^{max(s,1)})` and `‖u‖/‖m‖` in `W^{s,p}`, `s ∈ {0,1,2}`, `p ∈ {2,∞}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceRatio {
    pub s: usize,
    pub p_inf: bool,
    pub m_over_u: f64,
    pub u_over_m: f64,
}

pub fn norm_equivalence_battery(u: &[C64], sp: &Spectral, frame: &FrameBasis) -> Result<Vec<EquivalenceRatio>> {
    let f = frame::u_to_m(u, frame)?;
    let mc: Vec<Vec<C64>> = f.m.iter().map(|c| sp.forward_real(c)).collect();
    let uc = vec![sp.forward(u)];
    let mut out = Vec::new();
    for s in 0..=2 {
        for p_inf in [false, true] {
            let nm = wkp_norm(sp, &mc, s, p_inf);
            let nu = wkp_norm(sp, &uc, s, p_inf);
            out.push(EquivalenceRatio {
                s,
                p_inf,
                m_over_u: nm / (nu + nu.powi(s.max(1) as i32)),
                u_over_m: nu / nm,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{random_smooth_u, u_to_m};
    use crate::grid::gaussian;
    use crate::propagator::PropagatorCache;
    use std::f64::consts::PI;

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 2), vec![[2, 0, 0]]);
        assert_eq!(multi_indices(2, 2).len(), 3);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(2, 0), vec![[0, 0, 0]]);
    }

    #[test]
    fn w_index_values() {
        assert_eq!(w_index(2, 1), 1);
        assert_eq!(w_index(2, 2), 0);
        assert_eq!(w_index(3, 2), 1);
        assert_eq!(w_index(1, 1), 0);
    }

    #[test]
    fn zero_field_norms() {
        let g = Grid::helical(2, 16, &[]).unwrap();
        let sp = Spectral::new(g);
        let f = PerturbationFields::zero(&g, frame::Representation::U);
        let r = norms(&f, &sp, 2, 0.0);
        assert_eq!(r, NormReport::default());
    }

    #[test]
    fn gaussian_norms_closed_form() {
        let sigma: f64 = 2.0;
        let g = Grid::helical(16, 16, &[]).unwrap();
        let sp = Spectral::new(g);
        let amp = 1.0 / (sigma * (2.0 * PI).sqrt());
        let v = gaussian(&g, C64::new(amp, 0.0), sigma);
        let c = vec![sp.forward(&v)];
        let n = field_norms(&sp, &c, 0);
        assert!((n.l1 - 1.0).abs() < 1e-8);
        let l2 = amp * (PI.sqrt() * sigma).sqrt();
        assert!((n.l2 - l2).abs() < 1e-8);
        assert!((n.linf - amp).abs() < 1e-12);
        // Plancherel: H⁰ = L².
        assert!((n.hs - n.l2).abs() < 1e-12 * n.l2);
    }

    #[test]
    fn norm_report_interpolation() {
        let g = Grid::helical(2, 16, &[(16, 8.0)]).unwrap();
        let sp = Spectral::new(g);
        let fr = FrameBasis::new(g).unwrap();
        let f = u_to_m(&random_smooth_u(&g, 4, 0.4, 2), &fr).unwrap();
        let r = norms(&f, &sp, 2, 1.0);
        assert!(r.is_valid() && r.interpolation_ok());
        assert!((r.sup_u - 0.4).abs() < 1e-12);
    }

    #[test]
    fn fit_is_exact_on_power_law_and_scale_invariant() {
        let series: Vec<(f64, f64)> = (0..50).map(|i| {
            let t = 2.0 + i as f64;
            (t, (1.0 + 0.5 * t).powf(-0.5))
        }).collect();
        let f = fit_decay(&series, 0.5, [0.0, 100.0]).unwrap();
        assert!((f.exponent + 0.5).abs() < 1e-12 && (f.prefactor - 1.0).abs() < 1e-12);
        let scaled: Vec<(f64, f64)> = series.iter().map(|(t, v)| (*t, 7.0 * v)).collect();
        let g = fit_decay(&scaled, 0.5, [0.0, 100.0]).unwrap();
        assert!((g.exponent - f.exponent).abs() < 1e-12 && (g.prefactor - 7.0).abs() < 1e-10);
        assert!(fit_decay(&series[..3], 0.5, [0.0, 100.0]).is_err());
        let mut bad = series.clone();
        bad[10].1 = 0.0;
        assert!(matches!(fit_decay(&bad, 0.5, [0.0, 100.0]), Err(HelixError::FitRejected(_))));
    }

    #[test]
    fn exponential_fit_exact() {
        let series: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 3.0 * (-0.2 * i as f64).exp())).collect();
        let (rate, _) = fit_exponential(&series, [0.0, 30.0]).unwrap();
        assert!((rate - 0.2).abs() < 1e-12);
    }

    #[test]
    fn d1_heat_linf_decay() {
        // Exact heat evolution of an L¹ Gaussian on a large box: ‖·‖_∞ ~ (1+t)^{−½}.
        let g = Grid::helical(128, 4, &[]).unwrap();
        let sp = Spectral::new(g);
        let c0 = sp.forward(&gaussian(&g, C64::new(1.0, 0.0), 0.5));
        let series: Vec<(f64, f64)> = (1..=60)
            .map(|i| {
                let t = 5.0 * i as f64;
                let c = sp.multiply(&c0, |q| C64::new((-t * q[0] * q[0]).exp(), 0.0));
                (t, field_norms(&sp, &[c], 0).linf)
            })
            .collect();
        let f = fit_decay(&series, 1.0, [2.0, 300.0]).unwrap();
        assert!((f.exponent + 0.5).abs() < 0.025, "{}", f.exponent);
    }

    #[test]
    fn wrap_time_detection() {
        let s = vec![(0.0, 1e-3), (1.0, 1e-5), (2.0, 1e-7), (3.0, 5e-7), (4.0, 2e-6), (5.0, 1e-5)];
        assert_eq!(wrap_time(&s), Some(4.0));
        assert_eq!(wrap_time(&s[..4]), None);
    }

    #[test]
    fn m_functionals_zero_and_monotone() {
        let z = vec![MSample { t: 0.0, ..Default::default() }, MSample { t: 1.0, ..Default::default() }];
        let m = m_functionals(&z, 1.0, 2, 0.1).unwrap();
        assert_eq!(m.m, 0.0);
        let s: Vec<MSample> = (0..10)
            .map(|i| {
                let t = i as f64;
                let w = 1.0 + t;
                MSample { t, ul_l2: w.powf(-0.5), grad_ul_hs: w.powf(-1.0), ul_linf: w.powf(-1.0), grad_ul_ws_inf: w.powf(-1.5), uh_hs: (-t).exp(), uh_hs1: (-t).exp() }
            })
            .collect();
        let series = m_functionals_series(&s, 1.0, 2, 0.1).unwrap();
        assert!(series.windows(2).all(|w| w[1].m >= w[0].m));
        assert!(series.iter().all(|x| x.m >= x.m_l.max(x.m_h)));
    }

    #[test]
    fn bulk_identity_and_half_helix() {
        let g = Grid::helical(2, 48, &[(48, 8.0)]).unwrap();
        let sp = Spectral::new(g);
        let fr = FrameBasis::new(g).unwrap();
        let f = u_to_m(&random_smooth_u(&g, 8, 0.4, 2), &fr).unwrap();
        let h = fr.h();
        let n: VecField = std::array::from_fn(|k| h[k].iter().zip(&f.m[k]).map(|(a, b)| a + b).collect());
        let (pw, integ) = bulk_identity_defect(&n, &sp);
        assert!(pw <= tol::ENERGY_IDENTITY, "{pw:e}");
        assert!(integ <= tol::ENERGY_IDENTITY, "{integ:e}");
        let (c, d) = half_helix_residuals(&Grid::helical(2, 16, &[(8, 4.0)]).unwrap()).unwrap();
        assert!(c <= tol::HALF_HELIX && d <= tol::HALF_HELIX);
        assert!(half_helix_residuals(&Grid::helical(3, 16, &[]).unwrap()).is_err());
        // The helix itself has zero bulk density: E[h] = 0.
        assert!(energy(&h, &sp).abs() < 1e-12);
    }

    #[test]
    fn hessian_ratio_tends_to_one() {
        let g = Grid::helical(4, 16, &[(16, 12.0)]).unwrap();
        let sp = Spectral::new(g);
        let fr = FrameBasis::new(g).unwrap();
        let cache = PropagatorCache::new(g).unwrap();
        let base = random_smooth_u(&g, 12, 1.0, 2);
        let ratio = |amp: f64| {
            let u: Vec<C64> = base.iter().map(|w| w * amp).collect();
            energy_report(&u_to_m(&u, &fr).unwrap(), &sp, &fr, &cache).unwrap().hessian_ratio
        };
        let r3 = ratio(1e-3);
        assert!((r3 - 1.0).abs() < tol::HESSIAN_RATIO, "{r3}");
        assert!((ratio(1e-2) - 1.0).abs() > (r3 - 1.0).abs());
        let zero = PerturbationFields::zero(&g, frame::Representation::U);
        let e = energy_report(&zero, &sp, &fr, &cache).unwrap();
        assert_eq!((e.total_relative_energy.abs() < 1e-12, e.hessian_quadratic), (true, 0.0));
    }

    #[test]
    fn equivalence_battery_finite_at_049() {
        let g = Grid::helical(2, 16, &[(16, 8.0)]).unwrap();
        let sp = Spectral::new(g);
        let fr = FrameBasis::new(g).unwrap();
        let r = norm_equivalence_battery(&random_smooth_u(&g, 3, 0.49, 2), &sp, &fr).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|x| x.m_over_u.is_finite() && x.u_over_m.is_finite() && x.m_over_u > 0.0));
        // s = 0, p = 2: |m| ≥ |u| pointwise, so ‖u‖/‖m‖ ≤ 1.
        assert!(r[0].u_over_m <= 1.0 + 1e-14);
    }
}
