//! Time integration of the perturbation dynamics.
//!
//! * `etd-u`: the u-equation `∂ₜu = (−α+i)Au + αN₁ + N₂` with the linear part solved exactly per
//!   Bloch slot and a two-stage exponential Runge–Kutta rule (`c₂ = ½`) for the nonlinearity.
//! * `imex-m`: the m-equation with `αΔm` implicit and every other term explicit, using the
//!   ARS(2,2,2) additive Runge–Kutta pair, followed by pointwise renormalisation of `h + m`.
//! * `regularized-m`: as `imex-m` with an extra implicit `−βΔ²m`.

use crate::diagnostics::{self, MSample, NormReport};
use crate::frame::{self, FrameBasis, PerturbationFields, Representation, VecField};
use crate::grid::{gaussian, Grid, Spectral, SpectralField};
use crate::propagator::{self, phi12, CacheMode, PropagatorCache};
use crate::studies::FitRecord;
use crate::tolerances as tol;
use crate::{par, HelixError, Result, C64};
use serde::{Deserialize, Serialize};

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EtdU,
    ImexM,
    RegularizedM,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EtdU => "etd-u",
            Scheme::ImexM => "imex-m",
            Scheme::RegularizedM => "regularized-m",
        }
    }

    pub fn representation(self) -> Representation {
        match self {
            Scheme::EtdU => Representation::U,
            _ => Representation::M,
        }
    }
}

/// Periodic box of `n_per` helix periods with `m` points per period (and, for `d = 2`, `n2`
/// points over a transverse length `l2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoxConfig {
    pub n_per: usize,
    pub m: usize,
    pub n2: usize,
    pub l2: f64,
}

impl Default for BoxConfig {
    fn default() -> Self {
        BoxConfig { n_per: 256, m: 8, n2: 256, l2: 2.0 * std::f64::consts::PI * 32.0 }
    }
}

impl BoxConfig {
    pub fn grid(&self, d: usize) -> Result<Grid> {
        match d {
            1 => Grid::helical(self.n_per, self.m, &[]),
            2 => Grid::helical(self.n_per, self.m, &[(self.n2, self.l2)]),
            _ => Err(HelixError::InvalidArgument(format!("evolution supports d ∈ {{1, 2}}, got {d}"))),
        }
    }
}

/// Shape of the initial perturbation (always specified in u-form).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    /// `amplitude · exp(−|x − x_c|²/(2 width²))`.
    Gaussian,
    /// Smooth random Fourier modes (`|k| ≤ max_mode` per axis) with `sup|u| = amplitude`.
    Random,
    /// Gaussian with a quadratic phase `exp(i·chirp·|x − x_c|²)`; for `chirp > 0` the dispersive
    /// part of the flow focuses it, so `sup|u|` grows before it decays.
    ChirpedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub width: f64,
    pub seed: u64,
    pub max_mode: i64,
    pub chirp: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig { kind: InitialKind::Gaussian, amplitude: 1e-3, width: 1.0, seed: 1, max_mode: 3, chirp: 0.0 }
    }
}

/// Parameters of one nonlinear run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub d: usize,
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub beta: f64,
    /// Sobolev order of the `H^s`/`W^{k,∞}` diagnostics.
    pub s: usize,
    /// Steps between snapshots.
    pub snapshot_stride: usize,
    /// Stop the run (termination `wraparound`) once boundary mass is detected.
    pub stop_on_wrap: bool,
    pub delta0_cutoff: f64,
    #[serde(rename = "box")]
    pub grid: BoxConfig,
    pub initial: InitialConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            d: 1,
            alpha: 1.0,
            dt: 0.25,
            t_end: 400.0,
            scheme: Scheme::EtdU,
            beta: 0.0,
            s: 2,
            snapshot_stride: 4,
            stop_on_wrap: false,
            delta0_cutoff: tol::DELTA0_CUTOFF,
            grid: BoxConfig::default(),
            initial: InitialConfig::default(),
        }
    }
}

impl SimConfig {
    /// Desk-scale defaults per dimension (d = 2: 32 periods × 256 transverse points).
    pub fn for_dimension(d: usize) -> Self {
        let mut c = SimConfig::default();
        if d == 2 {
            c.d = 2;
            c.grid = BoxConfig { n_per: 32, m: 8, n2: 256, l2: 2.0 * std::f64::consts::PI * 32.0 };
            c.dt = 1.0;
            c.t_end = 500.0;
            c.snapshot_stride = 2;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HelixError::InvalidArgument(m));
        if !(1..=2).contains(&self.d) {
            return bad(format!("evolution supports d ∈ {{1, 2}}, got {}", self.d));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be > 0", self.alpha));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("need dt > 0 and t_end ≥ 0 (dt = {}, t_end = {})", self.dt, self.t_end));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be ≥ 0", self.beta));
        }
        if self.beta != 0.0 && self.scheme != Scheme::RegularizedM {
            return bad(format!("beta = {} requires scheme regularized-m (got {})", self.beta, self.scheme.name()));
        }
        if self.snapshot_stride == 0 {
            return bad("snapshot_stride must be ≥ 1".into());
        }
        let ic = &self.initial;
        if !(ic.amplitude >= 0.0) || !(ic.width > 0.0) || ic.max_mode < 0 || !ic.chirp.is_finite() {
            return bad("initial data needs amplitude ≥ 0, width > 0 and max_mode ≥ 0".into());
        }
        self.grid.grid(self.d)?.n_per()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        self.grid.grid(self.d)
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// The state of a run.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub fields: PerturbationFields,
    pub step_count: usize,
    pub max_u_sup_seen: f64,
}

impl SimState {
    pub fn new(fields: PerturbationFields) -> Self {
        let s = fields.sup_u();
        SimState { t: 0.0, fields, step_count: 0, max_u_sup_seen: s }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    SmallnessViolated { t: f64, sup_u: f64 },
    ConstraintViolated { t: f64, defect: f64 },
    Wraparound { t: f64 },
}

impl Termination {
    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

/// One snapshot of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub norms: NormReport,
    pub m_l: f64,
    pub m_h: f64,
    /// `E[h + m] − E[h]` on the box.
    pub energy: f64,
    pub boundary_fraction: f64,
    pub sphere_defect: f64,
}

/// Everything recorded by [`evolve`].
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config: SimConfig,
    pub series: Vec<SeriesRow>,
    pub termination: Termination,
    pub t_wrap: Option<f64>,
    pub max_u_sup_seen: f64,
    pub max_sphere_defect: f64,
    /// Surrogate `c₀` used in `M_H`.
    pub c0: f64,
    /// Time at which the running supremum in `M_H` was attained (last snapshot's value).
    pub m_h_argsup: f64,
    #[serde(skip)]
    pub final_state: Option<SimState>,
}

impl RunRecord {
    /// Header of the CSV series.
    pub const CSV_HEADER: &'static str = "t,L1,L2,Linf,Hs,M_L,M_H,sup_u,energy";

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        use crate::bloch::fmt17;
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.series {
            let n = &r.norms;
            let cols = [n.t, n.l1, n.l2, n.linf, n.hs, r.m_l, r.m_h, n.sup_u, r.energy];
            writeln!(out, "{}", cols.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(","))?;
        }
        Ok(())
    }

    /// Time of the last snapshot.
    pub fn t_last(&self) -> f64 {
        self.series.last().map_or(0.0, |r| r.norms.t)
    }

    /// Fits of the `L²` and `L^∞` decay of `m` against `−d/4` and `−d/2` over `[2/α, 0.8 t_wrap]`.
    pub fn decay_fits(&self) -> Result<Vec<FitRecord>> {
        let window = diagnostics::default_window(self.config.alpha, self.t_wrap, self.t_last());
        let d = self.config.d as f64;
        let mut out = Vec::new();
        for (name, expected, get) in
            [("L2", -d / 4.0, (|r: &SeriesRow| r.norms.l2) as fn(&SeriesRow) -> f64), ("Linf", -d / 2.0, |r| r.norms.linf)]
        {
            let series: Vec<(f64, f64)> = self.series.iter().map(|r| (r.norms.t, get(r))).collect();
            let fit = diagnostics::fit_decay(&series, self.config.alpha, window)?;
            out.push(FitRecord::new(name, &fit, expected, tol::NONLINEAR_DECAY_REL));
        }
        Ok(out)
    }

    /// Relative growth of the running bound `M` over the last quarter of the run,
    /// `M(T)/M(¾T) − 1` (0 once `M` has saturated).
    pub fn m_growth_last_quarter(&self) -> f64 {
        let t_last = self.t_last();
        let m = |r: &SeriesRow| r.m_l + r.m_h;
        match self.series.iter().rev().find(|r| r.norms.t <= 0.75 * t_last) {
            Some(r) if m(r) > 0.0 => self.m_final() / m(r) - 1.0,
            _ => 0.0,
        }
    }

    /// Final value of the running bound `M(t) = M_L + M_H`.
    pub fn m_final(&self) -> f64 {
        self.series.last().map_or(0.0, |r| r.m_l + r.m_h)
    }
}

/// Per-slot exponential factors of the `etd-u` step for one `dt`.
#[derive(Debug, Clone)]
struct EtdFactors {
    e_full: Vec<C64>,
    e_half: Vec<C64>,
    half_phi1: Vec<C64>,
    /// `dt (φ₁ − 2φ₂)(z)`.
    w0: Vec<C64>,
    /// `2 dt φ₂(z)`.
    w1: Vec<C64>,
}

impl EtdFactors {
    fn new(cache: &PropagatorCache, alpha: f64, dt: f64) -> Self {
        let k = C64::new(-alpha, 1.0) * dt;
        let per: Vec<[C64; 5]> = par::map_slice(&cache.lambda, |&l| {
            let z = k * l;
            let (p1, p2) = phi12(z);
            let (ph1, _) = phi12(z / 2.0);
            [z.exp(), (z / 2.0).exp(), ph1 * (dt / 2.0), (p1 - p2 * 2.0) * dt, p2 * (2.0 * dt)]
        });
        EtdFactors {
            e_full: per.iter().map(|p| p[0]).collect(),
            e_half: per.iter().map(|p| p[1]).collect(),
            half_phi1: per.iter().map(|p| p[2]).collect(),
            w0: per.iter().map(|p| p[3]).collect(),
            w1: per.iter().map(|p| p[4]).collect(),
        }
    }
}

/// Precomputed operators shared by every step of a run.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub config: SimConfig,
    pub sp: Spectral,
    pub frame: FrameBasis,
    pub cache: PropagatorCache,
    etd: Option<EtdFactors>,
    /// Implicit symbol `−α|k|² − β|k|⁴` per Fourier coefficient.
    implicit: Vec<f64>,
}

const ARS_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

impl Integrator {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let g = config.grid()?;
        let sp = Spectral::new(g);
        let frame = FrameBasis::new(g)?;
        let cache = PropagatorCache::build(g, config.delta0_cutoff, CacheMode::Full)?;
        let etd = (config.scheme == Scheme::EtdU).then(|| EtdFactors::new(&cache, config.alpha, config.dt));
        let implicit = (0..g.npts())
            .map(|i| {
                let q2 = sp.q2(i);
                -config.alpha * q2 - config.beta * q2 * q2
            })
            .collect();
        Ok(Integrator { config: config.clone(), sp, frame, cache, etd, implicit })
    }

    /// Initial fields for the configured initial data, in the scheme's authoritative form.
    pub fn initial_fields(&self) -> Result<PerturbationFields> {
        let g = self.sp.grid;
        let ic = self.config.initial;
        let u = match ic.kind {
            InitialKind::Zero => vec![C64::new(0.0, 0.0); g.npts()],
            InitialKind::Gaussian => gaussian(&g, C64::new(ic.amplitude, 0.0), ic.width),
            InitialKind::Random if ic.amplitude == 0.0 => vec![C64::new(0.0, 0.0); g.npts()],
            InitialKind::Random => frame::random_smooth_u(&g, ic.seed, ic.amplitude, ic.max_mode),
            InitialKind::ChirpedGaussian => {
                let centre = g.len.map(|l| l / 2.0);
                gaussian(&g, C64::new(ic.amplitude, 0.0), ic.width)
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let p = g.point(i);
                        let r2: f64 = (0..g.d).map(|a| (p[a] - centre[a]).powi(2)).sum();
                        v * C64::from_polar(1.0, ic.chirp * r2)
                    })
                    .collect()
            }
        };
        let mut f = frame::u_to_m(&u, &self.frame)?;
        f.authoritative = self.config.scheme.representation();
        Ok(f)
    }

    /// One step with the configured scheme.
    pub fn step(&self, state: &mut SimState) -> Result<()> {
        match self.config.scheme {
            Scheme::EtdU => self.step_etd_u(state),
            Scheme::ImexM => self.step_imex_m(state),
            Scheme::RegularizedM => self.step_regularized_m(state),
        }
    }

    /// Exponential Runge–Kutta step of the u-equation:
    /// `U = e^{hL/2}u + (h/2)φ₁(hL/2)N(u)`,
    /// `u⁺ = e^{hL}u + h[(φ₁ − 2φ₂)(hL)N(u) + 2φ₂(hL)N(U)]`.
    pub fn step_etd_u(&self, state: &mut SimState) -> Result<()> {
        let f = self.etd.as_ref().ok_or_else(|| HelixError::InvalidArgument("integrator not built for etd-u".into()))?;
        let (alpha, sp, cache) = (self.config.alpha, &self.sp, &self.cache);
        let u = &state.fields.u;
        let e = cache.to_eigen(&sp.forward(u))?;
        let n0 = cache.to_eigen(&sp.forward(&frame::nonlinearity_u(u, alpha, sp, &self.frame)?))?;
        let mid: Vec<C64> = (0..e.len()).map(|s| f.e_half[s] * e[s] + f.half_phi1[s] * n0[s]).collect();
        let u_mid = sp.inverse(&cache.from_eigen(&mid)?);
        let n1 = cache.to_eigen(&sp.forward(&frame::nonlinearity_u(&u_mid, alpha, sp, &self.frame)?))?;
        let next: Vec<C64> = (0..e.len()).map(|s| f.e_full[s] * e[s] + f.w0[s] * n0[s] + f.w1[s] * n1[s]).collect();
        let u_next = sp.inverse(&cache.from_eigen(&next)?);
        let mut fields = frame::u_to_m(&u_next, &self.frame)?;
        fields.authoritative = Representation::U;
        self.advance(state, fields);
        Ok(())
    }

    /// ARS(2,2,2) step of the m-equation with `αΔm` implicit, then renormalisation of `h + m`.
    pub fn step_imex_m(&self, state: &mut SimState) -> Result<()> {
        self.step_m(state)
    }

    /// As [`Integrator::step_imex_m`] with the additional implicit `−βΔ²m`.
    pub fn step_regularized_m(&self, state: &mut SimState) -> Result<()> {
        self.step_m(state)
    }

    /// Explicit part `rhs_m(m) − αΔm`, as Fourier coefficients per component.
    fn explicit_m(&self, m: &VecField) -> [Vec<C64>; 3] {
        let r = frame::rhs_m(m, self.config.alpha, &self.sp, &self.frame);
        std::array::from_fn(|k| {
            let rc = self.sp.forward_real(&r[k]);
            let mc = self.sp.forward_real(&m[k]);
            let a = self.config.alpha;
            (0..rc.len()).map(|i| rc[i] - mc[i] * (-a * self.sp.q2(i))).collect()
        })
    }

    fn step_m(&self, state: &mut SimState) -> Result<()> {
        let h = self.config.dt;
        let (g, d) = (ARS_GAMMA, 1.0 - 1.0 / (2.0 * ARS_GAMMA));
        let sp = &self.sp;
        let m0 = &state.fields.m;
        let y0: [Vec<C64>; 3] = std::array::from_fn(|k| sp.forward_real(&m0[k]));
        let f0 = self.explicit_m(m0);
        let solve = |rhs: &[C64]| -> Vec<C64> {
            rhs.iter().zip(&self.implicit).map(|(r, l)| r / (1.0 - g * h * l)).collect()
        };
        let y1: [Vec<C64>; 3] =
            std::array::from_fn(|k| solve(&(0..y0[k].len()).map(|i| y0[k][i] + f0[k][i] * (g * h)).collect::<Vec<_>>()));
        let m1: VecField = std::array::from_fn(|k| sp.inverse_real(&y1[k]));
        let f1 = self.explicit_m(&m1);
        let y2: [Vec<C64>; 3] = std::array::from_fn(|k| {
            let rhs: Vec<C64> = (0..y0[k].len())
                .map(|i| y0[k][i] + (f0[k][i] * d + f1[k][i] * (1.0 - d)) * h + y1[k][i] * (self.implicit[i] * h * (1.0 - g)))
                .collect();
            solve(&rhs)
        });
        let mut m2: VecField = std::array::from_fn(|k| sp.inverse_real(&y2[k]));
        let defect = frame::sphere_defect(&m2, &self.frame);
        let guard = if self.config.beta > 0.0 { tol::SPHERE_STEP_REGULARIZED } else { tol::SPHERE_STEP };
        if defect > guard || !defect.is_finite() {
            return Err(HelixError::ConstraintViolated { defect });
        }
        for i in 0..m2[0].len() {
            let hh = self.frame.h_at(i);
            let n: [f64; 3] = std::array::from_fn(|k| hh[k] + m2[k][i]);
            let r = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
            for k in 0..3 {
                m2[k][i] = n[k] / r - hh[k];
            }
        }
        let fields = frame::fields_from_m(m2, &self.frame)?;
        self.advance(state, fields);
        Ok(())
    }

    fn advance(&self, state: &mut SimState, fields: PerturbationFields) {
        state.step_count += 1;
        state.t = state.step_count as f64 * self.config.dt;
        state.max_u_sup_seen = state.max_u_sup_seen.max(fields.sup_u());
        state.fields = fields;
    }

    fn snapshot(&self, state: &SimState) -> Result<(SeriesRow, MSample)> {
        let f = &state.fields;
        let norms = diagnostics::norms(f, &self.sp, self.config.s, state.t);
        let ms = diagnostics::m_sample(&f.u, state.t, self.config.s, &self.sp, &self.cache)?;
        let h = self.frame.h();
        let n: VecField = std::array::from_fn(|k| h[k].iter().zip(&f.m[k]).map(|(a, b)| a + b).collect());
        let energy = diagnostics::energy(&n, &self.sp) - diagnostics::energy(&h, &self.sp);
        Ok((
            SeriesRow {
                norms,
                m_l: 0.0,
                m_h: 0.0,
                energy,
                boundary_fraction: propagator::boundary_mass_fraction(&self.sp.grid, &f.u),
                sphere_defect: f.sphere_defect(&self.frame),
            },
            ms,
        ))
    }
}

fn termination_of(e: HelixError, t: f64) -> Result<Termination> {
    match e {
        HelixError::SmallnessViolated { sup_u } => Ok(Termination::SmallnessViolated { t, sup_u }),
        HelixError::ConstraintViolated { defect } => Ok(Termination::ConstraintViolated { t, defect }),
        other => Err(other),
    }
}

/// Runs the configured scheme from `initial`; abnormal terminations are recorded in the returned
/// record (only configuration errors are returned as `Err`).
pub fn evolve(config: &SimConfig, initial: PerturbationFields) -> Result<RunRecord> {
    let integ = Integrator::new(config)?;
    evolve_with(&integ, initial)
}

/// [`evolve`] with a prebuilt integrator.
pub fn evolve_with(integ: &Integrator, initial: PerturbationFields) -> Result<RunRecord> {
    let config = &integ.config;
    if initial.u.len() != integ.sp.grid.npts() {
        return Err(HelixError::GridMismatch(format!("initial data has {} points", initial.u.len())));
    }
    let c0 = integ.cache.c0_surrogate()?;
    let mut state = SimState::new(initial);
    let mut rows = Vec::new();
    let mut msamples = Vec::new();
    let mut termination = Termination::Completed;
    let mut t_wrap = None;
    let n_steps = config.n_steps();

    if state.max_u_sup_seen > tol::SMALLNESS {
        termination = Termination::SmallnessViolated { t: 0.0, sup_u: state.max_u_sup_seen };
    } else {
        let (r, ms) = integ.snapshot(&state)?;
        rows.push(r);
        msamples.push(ms);
    }
    while termination.is_completed() && state.step_count < n_steps {
        if let Err(e) = integ.step(&mut state) {
            termination = termination_of(e, state.t + config.dt)?;
            break;
        }
        if state.max_u_sup_seen > tol::SMALLNESS {
            termination = Termination::SmallnessViolated { t: state.t, sup_u: state.max_u_sup_seen };
            break;
        }
        if state.step_count % config.snapshot_stride == 0 || state.step_count == n_steps {
            let (r, ms) = integ.snapshot(&state)?;
            rows.push(r);
            msamples.push(ms);
            if t_wrap.is_none() {
                let bf: Vec<(f64, f64)> = rows.iter().map(|r| (r.norms.t, r.boundary_fraction)).collect();
                t_wrap = diagnostics::wrap_time(&bf);
                if let (Some(t), true) = (t_wrap, config.stop_on_wrap) {
                    termination = Termination::Wraparound { t };
                }
            }
        }
    }
    let mut m_h_argsup = 0.0;
    if !msamples.is_empty() {
        let mf = diagnostics::m_functionals_series(&msamples, config.alpha, config.d, c0)?;
        for (r, m) in rows.iter_mut().zip(mf) {
            r.m_l = m.m_l;
            r.m_h = m.m_h;
            m_h_argsup = m.m_h_argsup;
        }
    }
    let max_sphere_defect = rows.iter().map(|r| r.sphere_defect).fold(0.0, f64::max);
    Ok(RunRecord {
        config: config.clone(),
        series: rows,
        termination,
        t_wrap,
        max_u_sup_seen: state.max_u_sup_seen,
        max_sphere_defect,
        c0,
        m_h_argsup,
        final_state: Some(state),
    })
}

/// Relative `L²` distance between two u-fields.
pub fn relative_l2(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

/// `L²` distance between two m-fields.
pub fn m_distance(a: &VecField, b: &VecField, grid: &Grid) -> f64 {
    ((0..3).map(|k| a[k].iter().zip(&b[k]).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// Runs `config` to `t_end` from its configured initial data and returns the final fields.
pub fn final_fields(config: &SimConfig) -> Result<(PerturbationFields, Termination)> {
    let integ = Integrator::new(config)?;
    let mut state = SimState::new(integ.initial_fields()?);
    for _ in 0..config.n_steps() {
        if let Err(e) = integ.step(&mut state) {
            return Ok((state.fields, termination_of(e, state.t + config.dt)?));
        }
    }
    Ok((state.fields, Termination::Completed))
}

/// Observed order `log₂(‖y_h − y_{h/2}‖ / ‖y_{h/2} − y_{h/4}‖)` from three final states.
pub fn observed_order(coarse: &VecField, mid: &VecField, fine: &VecField, grid: &Grid) -> f64 {
    (m_distance(coarse, mid, grid) / m_distance(mid, fine, grid)).log2()
}

/// `Q_H`-projected coefficients of a u-field (convenience for high-frequency studies).
pub fn high_part(u: &[C64], sp: &Spectral, cache: &PropagatorCache) -> Result<SpectralField> {
    cache.project_high(&SpectralField::from_values(sp, u))
}
