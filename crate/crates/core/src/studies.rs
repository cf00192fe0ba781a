//! Experiment drivers shared by the `helix` CLI and the acceptance suite: linear `Q_L`
//! decay, kernel norm scans and the high-frequency estimate.

use crate::diagnostics::{self, DecayFit};
use crate::evolution::{self, BoxConfig, InitialConfig, InitialKind, Scheme, SimConfig};
use crate::frame::VecField;
use crate::grid::{gaussian, Grid, Spectral, SpectralField};
use crate::propagator::{self, CacheMode, NormP, PropagatorCache};
use crate::tolerances as tol;
use crate::{HelixError, Result, C64};
use serde::{Deserialize, Serialize};

/// One fitted decay exponent with its prediction and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub quantity: String,
    pub exponent: f64,
    pub expected: f64,
    pub residual: f64,
    pub window: [f64; 2],
    pub rel_error: f64,
    pub passed: bool,
}

impl FitRecord {
    pub fn new(quantity: &str, fit: &DecayFit, expected: f64, rel_tol: f64) -> Self {
        let rel_error = ((fit.exponent - expected) / expected).abs();
        FitRecord {
            quantity: quantity.to_string(),
            exponent: fit.exponent,
            expected,
            residual: fit.residual,
            window: fit.window,
            rel_error,
            passed: rel_error <= rel_tol,
        }
    }
}

/// Box and sampling parameters of a linear `Q_L` decay study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearDecayConfig {
    pub d: usize,
    pub alpha: f64,
    pub n_per: usize,
    /// Points per helix period.
    pub m: usize,
    pub n2: usize,
    pub l2: f64,
    /// Width of the unit-mass Gaussian initial datum.
    pub width: f64,
    pub t_end: f64,
    /// Number of uniformly spaced sample times in `(0, t_end]`.
    pub samples: usize,
    pub delta0_cutoff: f64,
}

impl Default for LinearDecayConfig {
    fn default() -> Self {
        Self::for_dimension(2)
    }
}

impl LinearDecayConfig {
    /// Desk-scale defaults per dimension.
    pub fn for_dimension(d: usize) -> Self {
        match d {
            1 => LinearDecayConfig {
                d: 1,
                alpha: 1.0,
                n_per: 256,
                m: 8,
                n2: 1,
                l2: 1.0,
                width: 0.5,
                t_end: 2000.0,
                samples: 200,
                delta0_cutoff: tol::DELTA0_CUTOFF,
            },
            _ => LinearDecayConfig {
                d: 2,
                alpha: 1.0,
                n_per: 256,
                m: 8,
                n2: 512,
                l2: 1600.0,
                width: 0.5,
                t_end: 6000.0,
                samples: 150,
                delta0_cutoff: tol::DELTA0_CUTOFF,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HelixError::InvalidArgument(m));
        if !(1..=2).contains(&self.d) {
            return bad(format!("linear decay supports d ∈ {{1, 2}}, got {}", self.d));
        }
        if !(self.alpha > 0.0) || !(self.t_end > 0.0) || !(self.width > 0.0) {
            return bad("alpha, t_end and width must be positive".into());
        }
        if self.samples < tol::FIT_MIN_SAMPLES || self.n_per == 0 || self.m < 4 {
            return bad("need samples ≥ 4, n_per ≥ 1 and m ≥ 4".into());
        }
        if self.d == 2 && (self.n2 < 2 || !(self.l2 > 0.0)) {
            return bad("d = 2 needs n2 ≥ 2 and l2 > 0".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        if self.d == 1 {
            Grid::helical(self.n_per, self.m, &[])
        } else {
            Grid::helical(self.n_per, self.m, &[(self.n2, self.l2)])
        }
    }
}

/// One sample of a linear decay study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSample {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub grad_l2: f64,
    pub grad_linf: f64,
    pub boundary_fraction: f64,
}

/// Result of [`linear_decay`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearDecayReport {
    pub config: LinearDecayConfig,
    pub samples: Vec<LinearSample>,
    pub t_wrap: Option<f64>,
    pub fits: Vec<FitRecord>,
}

impl LinearDecayReport {
    pub fn passed(&self) -> bool {
        !self.fits.is_empty() && self.fits.iter().all(|f| f.passed)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        use crate::bloch::fmt17;
        writeln!(out, "t,L2,Linf,grad_L2,grad_Linf,boundary_fraction")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(s.t),
                fmt17(s.l2),
                fmt17(s.linf),
                fmt17(s.grad_l2),
                fmt17(s.grad_linf),
                fmt17(s.boundary_fraction)
            )?;
        }
        Ok(())
    }
}

/// Unit-mass Gaussian centred in the box, as coefficients.
pub fn unit_gaussian(sp: &Spectral, width: f64) -> SpectralField {
    let g = sp.grid;
    let raw = gaussian(&g, C64::new(1.0, 0.0), width);
    let mass: f64 = raw.iter().map(|z| z.re).sum::<f64>() * g.cell_volume();
    let v: Vec<C64> = raw.into_iter().map(|z| z / mass).collect();
    SpectralField::from_values(sp, &v)
}

/// Evolves `Q_L` of a narrow Gaussian with the exact semigroup and fits the `L²`, `L^∞` decay
/// exponents of the solution and its gradient against `−(d/2)(1−1/p) − k/2`.
pub fn linear_decay(cfg: &LinearDecayConfig) -> Result<LinearDecayReport> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let sp = Spectral::new(g);
    let cache = PropagatorCache::build(g, cfg.delta0_cutoff, CacheMode::LowBand)?;
    let v0 = unit_gaussian(&sp, cfg.width);
    let times: Vec<f64> = (1..=cfg.samples).map(|i| cfg.t_end * i as f64 / cfg.samples as f64).collect();
    let mut samples = Vec::with_capacity(times.len());
    for &t in &times {
        let v = cache.evolve_low(&v0, t, cfg.alpha)?;
        let vals = sp.inverse(&v.coeffs);
        samples.push(LinearSample {
            t,
            l2: propagator::grad_norm(&sp, &v.coeffs, 0, NormP::Two)?,
            linf: vals.iter().map(|z| z.norm()).fold(0.0, f64::max),
            grad_l2: propagator::grad_norm(&sp, &v.coeffs, 1, NormP::Two)?,
            grad_linf: propagator::grad_norm(&sp, &v.coeffs, 1, NormP::Inf)?,
            boundary_fraction: propagator::boundary_mass_fraction(&g, &vals),
        });
    }
    let t_wrap = diagnostics::wrap_time(&samples.iter().map(|s| (s.t, s.boundary_fraction)).collect::<Vec<_>>());
    let window = diagnostics::default_window(cfg.alpha, t_wrap, cfg.t_end);
    let mut fits = Vec::new();
    let quantities: [(&str, NormP, usize, fn(&LinearSample) -> f64); 4] = [
        ("L2", NormP::Two, 0, |s| s.l2),
        ("Linf", NormP::Inf, 0, |s| s.linf),
        ("grad_L2", NormP::Two, 1, |s| s.grad_l2),
        ("grad_Linf", NormP::Inf, 1, |s| s.grad_linf),
    ];
    for (name, p, k, get) in quantities {
        let series: Vec<(f64, f64)> = samples.iter().map(|s| (s.t, get(s))).collect();
        let fit = diagnostics::fit_decay(&series, cfg.alpha, window)?;
        fits.push(FitRecord::new(name, &fit, propagator::expected_exponent(cfg.d, p, k), tol::LINEAR_DECAY_REL));
    }
    Ok(LinearDecayReport { config: cfg.clone(), samples, t_wrap, fits })
}

/// Parameters of a kernel norm scan `sup_y ‖∇^k G_L(t,·,y)‖_{L^p}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelScanConfig {
    pub d: usize,
    pub alpha: f64,
    pub n_per: usize,
    pub m: usize,
    pub n2: usize,
    pub l2: f64,
    /// `"2"` or `"inf"`.
    pub p: String,
    /// Derivative order (0 or 1).
    pub k: usize,
    pub t_end: f64,
    pub samples: usize,
    /// Offsets of `y₁` sampled across one helix period.
    pub y_samples: usize,
    pub delta0_cutoff: f64,
}

impl Default for KernelScanConfig {
    fn default() -> Self {
        KernelScanConfig {
            d: 2,
            alpha: 1.0,
            n_per: 128,
            m: 8,
            n2: 256,
            l2: 800.0,
            p: "inf".into(),
            k: 0,
            t_end: 1500.0,
            samples: 100,
            y_samples: 2,
            delta0_cutoff: tol::DELTA0_CUTOFF,
        }
    }
}

/// Result of [`kernel_scan`].
#[derive(Debug, Clone, Serialize)]
pub struct KernelScanReport {
    pub config: KernelScanConfig,
    pub scan: propagator::KernelScan,
    pub t_wrap: Option<f64>,
    pub fit: FitRecord,
}

/// Kernel norm scan on a box with its decay fit against `−(d/2)(1−1/p) − k/2`.
pub fn kernel_scan(cfg: &KernelScanConfig) -> Result<KernelScanReport> {
    let p = NormP::parse(&cfg.p)?;
    let lin = LinearDecayConfig {
        d: cfg.d,
        alpha: cfg.alpha,
        n_per: cfg.n_per,
        m: cfg.m,
        n2: cfg.n2,
        l2: cfg.l2,
        width: 1.0,
        t_end: cfg.t_end,
        samples: cfg.samples,
        delta0_cutoff: cfg.delta0_cutoff,
    };
    lin.validate()?;
    if cfg.k > 1 || cfg.y_samples == 0 {
        return Err(HelixError::InvalidArgument("need k ∈ {0, 1} and y_samples ≥ 1".into()));
    }
    let cache = PropagatorCache::build(lin.grid()?, cfg.delta0_cutoff, CacheMode::LowBand)?;
    let times: Vec<f64> = (1..=cfg.samples).map(|i| cfg.t_end * i as f64 / cfg.samples as f64).collect();
    let scan = propagator::kernel_norm_scan(&cache, &times, cfg.alpha, p, cfg.k, cfg.y_samples)?;
    let t_wrap = diagnostics::wrap_time(&times.iter().copied().zip(scan.boundary_fraction.iter().copied()).collect::<Vec<_>>());
    let window = diagnostics::default_window(cfg.alpha, t_wrap, cfg.t_end);
    let series: Vec<(f64, f64)> = scan.rows.iter().map(|r| (r.t, r.norm)).collect();
    let fit = diagnostics::fit_decay(&series, cfg.alpha, window)?;
    let name = format!("kernel_L{}_grad{}", cfg.p, cfg.k);
    let fit = FitRecord::new(&name, &fit, scan.expected, tol::LINEAR_DECAY_REL);
    Ok(KernelScanReport { config: cfg.clone(), scan, t_wrap, fit })
}

/// Parameters of the high-frequency decay study: `F = 0`, data `Q_H` of a Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighFrequencyConfig {
    pub d: usize,
    pub alpha: f64,
    pub n_per: usize,
    pub m: usize,
    pub n2: usize,
    pub l2: f64,
    pub width: f64,
    pub t_end: f64,
    pub samples: usize,
    /// Sobolev order of the monitored norm.
    pub s: f64,
    pub delta0_cutoff: f64,
}

impl Default for HighFrequencyConfig {
    fn default() -> Self {
        HighFrequencyConfig {
            d: 2,
            alpha: 1.0,
            n_per: 16,
            m: 8,
            n2: 64,
            l2: 100.0,
            width: 1.0,
            t_end: 300.0,
            samples: 100,
            s: 2.0,
            delta0_cutoff: tol::DELTA0_CUTOFF,
        }
    }
}

impl HighFrequencyConfig {
    /// Defaults per dimension (d = 1 uses a longer box and a shorter horizon: its floor is O(1)).
    pub fn for_dimension(d: usize) -> Self {
        match d {
            1 => HighFrequencyConfig { d: 1, n_per: 64, t_end: 20.0, ..Default::default() },
            _ => HighFrequencyConfig { d, ..Default::default() },
        }
    }
}

/// Result of [`high_frequency`].
#[derive(Debug, Clone, Serialize)]
pub struct HighFrequencyReport {
    pub config: HighFrequencyConfig,
    /// `(t, ‖Q_H v(t)‖_{H^s})`.
    pub series: Vec<(f64, f64)>,
    /// Smallest eigenvalue over slots not fully in `Q_L`.
    pub floor: f64,
    pub fitted_rate: f64,
    pub required_rate: f64,
    pub residual: f64,
    pub passed: bool,
}

/// Exponential decay of `‖e^{tL}Q_H v₀‖_{H^s}`; passes when the fitted rate is at least
/// `α · floor`.
pub fn high_frequency(cfg: &HighFrequencyConfig) -> Result<HighFrequencyReport> {
    let lin = LinearDecayConfig {
        d: cfg.d,
        alpha: cfg.alpha,
        n_per: cfg.n_per,
        m: cfg.m,
        n2: cfg.n2,
        l2: cfg.l2,
        width: cfg.width,
        t_end: cfg.t_end,
        samples: cfg.samples,
        delta0_cutoff: cfg.delta0_cutoff,
    };
    lin.validate()?;
    let g = lin.grid()?;
    let sp = Spectral::new(g);
    let cache = PropagatorCache::build(g, cfg.delta0_cutoff, CacheMode::Full)?;
    let v0 = cache.project_high(&unit_gaussian(&sp, cfg.width))?;
    let mut series = vec![(0.0, diagnostics::hs_norm(&sp, std::slice::from_ref(&v0.coeffs), cfg.s))];
    for i in 1..=cfg.samples {
        let t = cfg.t_end * i as f64 / cfg.samples as f64;
        let v = cache.apply_semigroup(&v0, t, cfg.alpha)?;
        series.push((t, diagnostics::hs_norm(&sp, std::slice::from_ref(&v.coeffs), cfg.s)));
    }
    let floor = cache.high_floor()?;
    let (rate, fit) = diagnostics::fit_exponential(&series, [tol::FIT_START_ALPHA_T / cfg.alpha, cfg.t_end])?;
    let required = cfg.alpha * floor;
    Ok(HighFrequencyReport {
        config: cfg.clone(),
        series,
        floor,
        fitted_rate: rate,
        required_rate: required,
        residual: fit.residual,
        passed: rate >= required,
    })
}

/// Parameters of the self-convergence and β → 0 studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Base run (scheme, β and dt are overridden per study).
    pub base: SimConfig,
    /// Successively halved time steps of the `etd-u` order study.
    pub etd_dts: Vec<f64>,
    /// Successively halved time steps of the `imex-m` order study.
    pub imex_dts: Vec<f64>,
    /// Regularisations of the β → 0 study (decreasing).
    pub betas: Vec<f64>,
    /// Time step and initial amplitude of the β study (the `−βΔ²m` term leaves the sphere at
    /// first order, so the study uses gentler data than the order study).
    pub beta_dt: f64,
    pub beta_amplitude: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        let mut base = SimConfig::for_dimension(1);
        base.grid = BoxConfig { n_per: 8, m: 16, n2: 1, l2: 1.0 };
        base.t_end = 0.5;
        base.initial = InitialConfig { kind: InitialKind::Random, amplitude: 0.2, max_mode: 2, seed: 7, ..Default::default() };
        ConvergenceConfig {
            base,
            etd_dts: vec![0.05, 0.025, 0.0125],
            imex_dts: vec![0.01, 0.005, 0.0025],
            betas: vec![1e-2, 1e-3, 1e-4],
            beta_dt: 0.005,
            beta_amplitude: 0.05,
        }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HelixError::InvalidArgument(m));
        for (name, dts) in [("etd_dts", &self.etd_dts), ("imex_dts", &self.imex_dts)] {
            if dts.len() < 3 {
                return bad(format!("{name}: need at least three time steps to form convergence ratios"));
            }
            if dts.iter().any(|d| !(*d > 0.0)) || dts.windows(2).any(|w| !(w[1] < w[0])) {
                return bad(format!("{name}: time steps must be positive and decreasing"));
            }
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(*b > 0.0)) {
            return bad("betas must be a nonempty list of positive values".into());
        }
        if !(self.beta_dt > 0.0) || !(self.beta_amplitude >= 0.0) {
            return bad("beta_dt must be > 0 and beta_amplitude ≥ 0".into());
        }
        let mut b = self.base.clone();
        b.beta = 0.0;
        b.validate()
    }
}

/// Observed orders of one scheme.
#[derive(Debug, Clone, Serialize)]
pub struct OrderStudy {
    pub scheme: Scheme,
    pub dts: Vec<f64>,
    /// `‖y_{h_i} − y_{h_{i+1}}‖` for consecutive steps.
    pub differences: Vec<f64>,
    /// `log₂` ratios of consecutive differences (scaled by the step ratio).
    pub orders: Vec<f64>,
    pub passed: bool,
}

/// One row of the β → 0 table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BetaRow {
    pub beta: f64,
    pub distance: f64,
}

/// Result of [`convergence`].
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub config: ConvergenceConfig,
    pub orders: Vec<OrderStudy>,
    pub beta_table: Vec<BetaRow>,
    pub beta_monotone: bool,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.beta_monotone && self.orders.iter().all(|o| o.passed)
    }
}

fn run_to_end(cfg: &SimConfig) -> Result<VecField> {
    let (f, term) = evolution::final_fields(cfg)?;
    if !term.is_completed() {
        return Err(HelixError::InvalidArgument(format!(
            "{} run with dt = {} (β = {}) terminated: {term:?}",
            cfg.scheme.name(),
            cfg.dt,
            cfg.beta
        )));
    }
    Ok(f.m)
}

fn order_study(base: &SimConfig, scheme: Scheme, dts: &[f64]) -> Result<OrderStudy> {
    let g = base.grid()?;
    let finals: Vec<VecField> = dts
        .iter()
        .map(|&dt| {
            let mut c = base.clone();
            c.scheme = scheme;
            c.beta = 0.0;
            c.dt = dt;
            run_to_end(&c)
        })
        .collect::<Result<_>>()?;
    let differences: Vec<f64> = finals.windows(2).map(|w| evolution::m_distance(&w[0], &w[1], &g)).collect();
    let orders: Vec<f64> = (0..differences.len() - 1)
        .map(|i| (differences[i] / differences[i + 1]).ln() / (dts[i] / dts[i + 1]).ln())
        .collect();
    let passed = orders.iter().all(|p| (p - 2.0).abs() <= tol::ORDER_TOL);
    Ok(OrderStudy { scheme, dts: dts.to_vec(), differences, orders, passed })
}

/// Self-convergence orders of `etd-u` and `imex-m` and the β → 0 table of `regularized-m`.
pub fn convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let orders = vec![order_study(&cfg.base, Scheme::EtdU, &cfg.etd_dts)?, order_study(&cfg.base, Scheme::ImexM, &cfg.imex_dts)?];
    let mut b = cfg.base.clone();
    b.scheme = Scheme::RegularizedM;
    b.dt = cfg.beta_dt;
    b.beta = 0.0;
    b.initial.amplitude = cfg.beta_amplitude;
    let g = b.grid()?;
    let reference = run_to_end(&b)?;
    let beta_table: Vec<BetaRow> = cfg
        .betas
        .iter()
        .map(|&beta| {
            let mut c = b.clone();
            c.beta = beta;
            Ok(BetaRow { beta, distance: evolution::m_distance(&run_to_end(&c)?, &reference, &g) })
        })
        .collect::<Result<_>>()?;
    let beta_monotone = beta_table.windows(2).all(|w| w[1].beta < w[0].beta && w[1].distance < w[0].distance);
    Ok(ConvergenceReport { config: cfg.clone(), orders, beta_table, beta_monotone })
}

/// A named pass/fail check with its measured value and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Verdict {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Verdict { name: name.into(), value, tolerance, passed: value <= tolerance }
    }

    /// Passes when `value ≥ tolerance`.
    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Verdict { name: name.into(), value, tolerance, passed: value >= tolerance }
    }

    /// A boolean check (value 1 = true).
    pub fn holds(name: &str, ok: bool) -> Self {
        Verdict { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, passed: ok }
    }
}

/// Parameters of the moving-frame self-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameCheckConfig {
    pub d: usize,
    pub n_per: usize,
    pub m: usize,
    pub n2: usize,
    pub l2: f64,
    pub alpha: f64,
    /// Number of seeded random fields for the master identity (seeds `first_seed..`).
    pub seeds: usize,
    pub first_seed: u64,
    pub sup: f64,
    pub max_mode: i64,
    /// `sup|u|` of the fields of the norm-equivalence battery.
    pub battery_sup: f64,
    pub battery_seeds: usize,
    /// Also evaluate the energy identities (bulk identity, half helix, Hessian ratio).
    pub energy_checks: bool,
    /// Feed an m off the sphere to the conversion guard (the check must then fail).
    pub force_constraint_violation: bool,
}

impl Default for FrameCheckConfig {
    fn default() -> Self {
        FrameCheckConfig {
            d: 2,
            n_per: 2,
            m: 24,
            n2: 24,
            l2: 8.0,
            alpha: 0.8,
            seeds: 20,
            first_seed: 1,
            sup: 0.3,
            max_mode: 2,
            battery_sup: 0.49,
            battery_seeds: 5,
            energy_checks: true,
            force_constraint_violation: false,
        }
    }
}

impl FrameCheckConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) || self.n_per == 0 || self.m < 4 || (self.d > 1 && (self.n2 < 4 || !(self.l2 > 0.0))) {
            return Err(HelixError::InvalidArgument(format!("frame-check grid: d = {}, n_per = {}, m = {}", self.d, self.n_per, self.m)));
        }
        if !(self.sup > 0.0 && self.sup <= tol::SMALLNESS) || !(self.battery_sup > 0.0 && self.battery_sup <= tol::SMALLNESS) {
            return Err(HelixError::InvalidArgument("sup and battery_sup must lie in (0, ½]".into()));
        }
        if self.seeds == 0 || !(self.alpha > 0.0) || self.max_mode < 1 {
            return Err(HelixError::InvalidArgument("need seeds ≥ 1, alpha > 0 and max_mode ≥ 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let t: Vec<(usize, f64)> = (1..self.d).map(|a| (self.n2, self.l2 + a as f64 - 1.0)).collect();
        Grid::helical(self.n_per, self.m, &t)
    }
}

/// Energy identities of the helix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentities {
    pub bulk_pointwise: f64,
    pub bulk_integrated: f64,
    pub half_helix_curl: f64,
    pub half_helix_div: f64,
    pub helix_energy: f64,
    pub hessian_ratio: f64,
}

/// Evaluates the bulk identity on a perturbed helix (`sup|u| = 0.4`), the κ = ½ helical state
/// residuals and the Hessian ratio at amplitude `1e−3`.
pub fn energy_identities() -> Result<EnergyIdentities> {
    use crate::frame::{random_smooth_u, u_to_m, FrameBasis};
    let g = Grid::helical(2, 48, &[(48, 8.0)])?;
    let sp = Spectral::new(g);
    let fr = FrameBasis::new(g)?;
    let f = u_to_m(&random_smooth_u(&g, 8, 0.4, 2), &fr)?;
    let h = fr.h();
    let n: VecField = std::array::from_fn(|k| h[k].iter().zip(&f.m[k]).map(|(a, b)| a + b).collect());
    let (bulk_pointwise, bulk_integrated) = diagnostics::bulk_identity_defect(&n, &sp);
    let helix_energy = diagnostics::energy(&h, &sp);
    let (half_helix_curl, half_helix_div) = diagnostics::half_helix_residuals(&Grid::helical(2, 16, &[(8, 4.0)])?)?;
    let g = Grid::helical(4, 16, &[(16, 12.0)])?;
    let sp = Spectral::new(g);
    let fr = FrameBasis::new(g)?;
    let cache = PropagatorCache::new(g)?;
    let u: Vec<C64> = random_smooth_u(&g, 12, 1e-3, 2);
    let hessian_ratio = diagnostics::energy_report(&u_to_m(&u, &fr)?, &sp, &fr, &cache)?.hessian_ratio;
    Ok(EnergyIdentities { bulk_pointwise, bulk_integrated, half_helix_curl, half_helix_div, helix_energy, hessian_ratio })
}

/// Result of [`frame_check`].
#[derive(Debug, Clone, Serialize)]
pub struct FrameCheckReport {
    pub config: FrameCheckConfig,
    /// Relative master-identity defect per seed.
    pub master_defects: Vec<(u64, f64)>,
    pub battery: Vec<(u64, Vec<diagnostics::EquivalenceRatio>)>,
    pub energy: Option<EnergyIdentities>,
    pub verdicts: Vec<Verdict>,
}

impl FrameCheckReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

/// Master identity on seeded random fields, the norm-equivalence battery, the input guard and
/// (optionally) the energy identities.
pub fn frame_check(cfg: &FrameCheckConfig) -> Result<FrameCheckReport> {
    use crate::frame::{self, random_smooth_u, FrameBasis};
    cfg.validate()?;
    let g = cfg.grid()?;
    let sp = Spectral::new(g);
    let fr = FrameBasis::new(g)?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.first_seed + i).collect();
    let master_defects = seeds
        .iter()
        .map(|&s| Ok((s, frame::master_identity_defect(&random_smooth_u(&g, s, cfg.sup, cfg.max_mode), cfg.alpha, &sp, &fr)?)))
        .collect::<Result<Vec<_>>>()?;
    let battery = (0..cfg.battery_seeds as u64)
        .map(|i| {
            let s = cfg.first_seed + 1000 + i;
            Ok((s, diagnostics::norm_equivalence_battery(&random_smooth_u(&g, s, cfg.battery_sup, cfg.max_mode), &sp, &fr)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_defect = master_defects.iter().map(|x| x.1).fold(0.0, f64::max);
    let finite = battery.iter().flat_map(|b| &b.1).all(|r| r.m_over_u.is_finite() && r.u_over_m.is_finite() && r.m_over_u > 0.0);
    let mut verdicts = vec![
        Verdict::at_most("master_identity_max_defect", max_defect, tol::MASTER_IDENTITY),
        Verdict::holds("equivalence_ratios_finite", finite),
    ];
    // Input guard: the conversion must accept the sphere and reject points off it.
    let guard_ok = if cfg.force_constraint_violation {
        let mut m = frame::zeros_vec(g.npts());
        m[0].iter_mut().for_each(|x| *x = 0.01);
        frame::m_to_u(&m, &fr).is_ok()
    } else {
        let f = frame::u_to_m(&random_smooth_u(&g, cfg.first_seed, cfg.sup, cfg.max_mode), &fr)?;
        frame::m_to_u(&f.m, &fr).is_ok()
    };
    verdicts.push(Verdict::holds("input_on_sphere", guard_ok));
    let energy = if cfg.energy_checks {
        let e = energy_identities()?;
        verdicts.push(Verdict::at_most("bulk_identity_pointwise", e.bulk_pointwise, tol::ENERGY_IDENTITY));
        verdicts.push(Verdict::at_most("half_helix_residual", e.half_helix_curl.max(e.half_helix_div), tol::HALF_HELIX));
        verdicts.push(Verdict::at_most("hessian_ratio_deviation", (e.hessian_ratio - 1.0).abs(), tol::HESSIAN_RATIO));
        Some(e)
    } else {
        None
    };
    Ok(FrameCheckReport { config: cfg.clone(), master_defects, battery, energy, verdicts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_decay_small_d1() {
        let c = LinearDecayConfig { n_per: 64, t_end: 150.0, samples: 60, ..LinearDecayConfig::for_dimension(1) };
        let r = linear_decay(&c).unwrap();
        assert_eq!(r.samples.len(), 60);
        let linf = r.fits.iter().find(|f| f.quantity == "Linf").unwrap();
        assert!(linf.rel_error < 0.1, "{linf:?}");
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 61);
        assert!(linear_decay(&LinearDecayConfig { d: 3, ..c.clone() }).is_err());
        assert!(linear_decay(&LinearDecayConfig { samples: 2, ..c }).is_err());
    }

    #[test]
    fn high_frequency_rate_exceeds_floor() {
        let c = HighFrequencyConfig { d: 1, n_per: 32, t_end: 15.0, samples: 30, ..Default::default() };
        let r = high_frequency(&c).unwrap();
        assert!(r.passed, "{} < {}", r.fitted_rate, r.required_rate);
        assert!(r.series.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn convergence_rejects_short_dt_lists() {
        let mut c = ConvergenceConfig::default();
        c.etd_dts = vec![0.1];
        assert!(convergence(&c).is_err());
        c.etd_dts = vec![0.1, 0.2, 0.05];
        assert!(c.validate().is_err());
    }

    #[test]
    fn frame_check_defaults_pass_and_guard_fails() {
        let c = FrameCheckConfig { seeds: 3, battery_seeds: 1, energy_checks: false, ..Default::default() };
        let r = frame_check(&c).unwrap();
        assert!(r.passed(), "{:?}", r.verdicts);
        assert_eq!(r.master_defects.len(), 3);
        let bad = frame_check(&FrameCheckConfig { force_constraint_violation: true, ..c }).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn verdict_helpers() {
        assert!(Verdict::at_most("a", 1.0, 1.0).passed);
        assert!(!Verdict::at_least("b", 0.5, 1.0).passed);
        assert!(!Verdict::holds("c", false).passed);
    }
}
