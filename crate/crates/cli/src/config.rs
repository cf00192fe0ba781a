//! Command configurations: TOML files overlaid on per-dimension defaults.
//!
//! A configuration file only needs the keys it changes. The dimension `d` is read first to pick
//! the defaults, the user table is merged over them key by key (tables recursively, everything
//! else replaced), and the result is deserialized with unknown keys rejected. The fully resolved
//! configuration is echoed to `config.toml` in the output directory, so feeding that file back
//! reproduces the run.

use crate::CliError;
use helix_core::bloch::BlochWavenumber;
use helix_core::evolution::SimConfig;
use helix_core::studies::{ConvergenceConfig, FrameCheckConfig, KernelScanConfig, LinearDecayConfig};
use helix_core::tolerances as tol;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

/// Band scan: a uniform `(ξ₁, ξ₂)` grid plus extra points and monotonicity slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    /// `ξ₁ = i/n1`, `i < n1`.
    pub n1: usize,
    /// Number of `ξ₂` values in `[xi2_min, xi2_max]`.
    pub n2: usize,
    pub xi2_min: f64,
    pub xi2_max: f64,
    /// Fourier truncation of the Bloch operator.
    pub k: usize,
    /// Extra wavenumbers `[ξ₁, ξ′…]` (1 to 3 entries) appended to the grid.
    pub extra_points: Vec<Vec<f64>>,
    /// Transverse wavenumbers at which band monotonicity in `ξ₁ ∈ [0, ½]` is checked.
    pub monotonicity_xi2: Vec<f64>,
    pub monotonicity_samples: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        BandsConfig {
            n1: 32,
            n2: 32,
            xi2_min: -2.0,
            xi2_max: 2.0,
            k: tol::K_SCAN,
            extra_points: Vec::new(),
            monotonicity_xi2: vec![0.0, 0.25, 0.5, 1.0],
            monotonicity_samples: 21,
        }
    }
}

impl BandsConfig {
    /// Grid points in scan order: the uniform grid, then the extra points.
    pub fn points(&self) -> Result<Vec<BlochWavenumber>, CliError> {
        let mut pts = helix_core::bloch::uniform_grid_2d(self.n1, self.xi2_min, self.xi2_max, self.n2)?;
        for p in &self.extra_points {
            if p.is_empty() || p.len() > 3 {
                return Err(CliError::Usage(format!("extra point {p:?} must have 1 to 3 entries")));
            }
            pts.push(BlochWavenumber::wrapped(p.len(), p[0], &p[1..])?);
        }
        if self.k < 4 || self.monotonicity_samples < 2 {
            return Err(CliError::Usage("need k ≥ 4 and monotonicity_samples ≥ 2".into()));
        }
        Ok(pts)
    }
}

/// `evolve`: one nonlinear run, or a sweep over initial amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub sim: SimConfig,
    /// Fit the `L²`/`L^∞` decay exponents and turn them into verdicts.
    pub fit_decay: bool,
    /// Write the initial and final fields as HLXF snapshots.
    pub write_snapshots: bool,
    /// If non-empty, run once per amplitude (in order) and stop at the first abnormal run.
    pub amplitudes: Vec<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { sim: SimConfig::default(), fit_decay: false, write_snapshots: true, amplitudes: Vec::new() }
    }
}

/// Parses a TOML document into a table (empty input → empty table).
pub fn parse_table(text: &str) -> Result<Table, CliError> {
    text.parse::<Table>().map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// Recursively overlays `user` on `base`.
pub fn merge(base: &mut Table, user: Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(u)) => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Overlays `user` on `defaults` and deserializes the result, rejecting unknown keys.
pub fn resolve<T: Serialize + DeserializeOwned>(defaults: &T, user: Table) -> Result<T, CliError> {
    let mut base = Table::try_from(defaults).map_err(|e| CliError::Run(format!("serializing defaults: {e}")))?;
    merge(&mut base, user);
    Value::Table(base).try_into().map_err(|e: toml::de::Error| CliError::Usage(format!("config: {}", e.message())))
}

fn dimension(t: &Table, path: &[&str], default: usize) -> Result<usize, CliError> {
    let mut cur = t;
    for key in &path[..path.len() - 1] {
        match cur.get(*key) {
            Some(Value::Table(inner)) => cur = inner,
            Some(_) => return Err(CliError::Usage(format!("config: `{key}` must be a table"))),
            None => return Ok(default),
        }
    }
    match cur.get(path[path.len() - 1]) {
        None => Ok(default),
        Some(Value::Integer(d)) if (1..=3).contains(d) => Ok(*d as usize),
        Some(v) => Err(CliError::Usage(format!("config: d must be 1, 2 or 3, got {v}"))),
    }
}

pub fn bands(user: Table) -> Result<BandsConfig, CliError> {
    resolve(&BandsConfig::default(), user)
}

pub fn kernel_scan(user: Table) -> Result<KernelScanConfig, CliError> {
    resolve(&KernelScanConfig::default(), user)
}

pub fn linear_decay(user: Table) -> Result<LinearDecayConfig, CliError> {
    let d = dimension(&user, &["d"], 2)?;
    resolve(&LinearDecayConfig::for_dimension(d), user)
}

pub fn evolve(user: Table) -> Result<EvolveConfig, CliError> {
    let d = dimension(&user, &["sim", "d"], 1)?;
    let defaults = EvolveConfig { sim: SimConfig::for_dimension(d), ..EvolveConfig::default() };
    resolve(&defaults, user)
}

pub fn frame_check(user: Table) -> Result<FrameCheckConfig, CliError> {
    resolve(&FrameCheckConfig::default(), user)
}

pub fn convergence(user: Table) -> Result<ConvergenceConfig, CliError> {
    resolve(&ConvergenceConfig::default(), user)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        assert_eq!(bands(Table::new()).unwrap(), BandsConfig::default());
        assert_eq!(evolve(Table::new()).unwrap().sim, SimConfig::default());
    }

    #[test]
    fn dimension_selects_defaults_and_keys_overlay() {
        let c = evolve(parse_table("[sim]\nd = 2\ndt = 0.5\n[sim.initial]\namplitude = 2e-3\n").unwrap()).unwrap();
        let d2 = SimConfig::for_dimension(2);
        assert_eq!(c.sim.grid, d2.grid);
        assert_eq!(c.sim.dt, 0.5);
        assert_eq!(c.sim.initial.amplitude, 2e-3);
        assert_eq!(c.sim.initial.width, d2.initial.width);
        let l = linear_decay(parse_table("d = 1").unwrap()).unwrap();
        assert_eq!(l, LinearDecayConfig::for_dimension(1));
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        for text in ["bogus = 1", "[sim]\nd = 7", "[sim.box]\nn_pers = 3", "n1 = \"x\"", "n1 = "] {
            let r = parse_table(text).and_then(|t| if text.contains("sim") { evolve(t).map(|_| ()) } else { bands(t).map(|_| ()) });
            assert!(matches!(r, Err(CliError::Usage(_))), "{text}: {r:?}");
        }
    }

    #[test]
    fn resolved_config_roundtrips() {
        let c = evolve(parse_table("fit_decay = true\namplitudes = [1e-3, 2e-3]").unwrap()).unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(evolve(parse_table(&text).unwrap()).unwrap(), c);
    }

    #[test]
    fn malformed_band_grids_are_rejected() {
        assert!(BandsConfig { n1: 0, ..Default::default() }.points().is_err());
        assert!(BandsConfig { xi2_min: 1.0, xi2_max: 0.0, ..Default::default() }.points().is_err());
        assert!(BandsConfig { extra_points: vec![vec![]], ..Default::default() }.points().is_err());
        let c = BandsConfig { n1: 2, n2: 1, extra_points: vec![vec![0.3, 0.0]], ..Default::default() };
        assert_eq!(c.points().unwrap().len(), 3);
    }
}
