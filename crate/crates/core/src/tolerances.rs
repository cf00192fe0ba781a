//! The single table of default tolerances and numerical defaults.
//!
//! Every verdict in the library, the acceptance suite and the `helix` CLI refers to these
//! constants; the README reproduces the table.

/// Eigenpair residual bound: `‖A_ξ φ − λ φ‖ ≤ EIG_RESIDUAL · max(1, λ)`.
pub const EIG_RESIDUAL: f64 = 1e-10;
/// Unit-norm tolerance for eigenvectors.
pub const EIG_UNIT_NORM: f64 = 1e-12;
/// Allowed change of a retained band under truncation doubling `K → 2K` (times `max(1, λ)`).
pub const TRUNCATION: f64 = 1e-10;
/// Band symmetry `λ(ξ₁,ξ′) = λ(1−ξ₁,ξ′) = λ(ξ₁,−ξ′)`.
pub const BAND_SYMMETRY: f64 = 1e-10;
/// d=3 → d=2 rotation reduction of the bands.
pub const D3_REDUCTION: f64 = 1e-10;
/// Slack allowed in the monotonicity checks of `λ₀`/`λ₁` in ξ₁ (eigensolver noise).
pub const MONOTONICITY_SLACK: f64 = 1e-12;
/// Agreement of the Lyapunov–Schmidt `λ₀` with the matrix eigensolve.
pub const LS_AGREEMENT: f64 = 1e-8;
/// Successive-difference stopping tolerance of the Lyapunov–Schmidt iteration.
pub const LS_TOL: f64 = 1e-14;
/// Iteration cap of the Lyapunov–Schmidt iteration.
pub const LS_MAX_ITER: usize = 500;
/// Truncation half-width used for band scans.
pub const K_SCAN: usize = 32;
/// Truncation half-width used by the Lyapunov–Schmidt oracle.
pub const K_ORACLE: usize = 16;
/// Ball radius δ₀ of the Lyapunov–Schmidt (small-ξ) regime.
pub const DELTA0: f64 = 0.1;
/// Support radius of the low-frequency cutoff χ used by `Q_L`/`Q_H` (χ = 1 below half of it).
pub const DELTA0_CUTOFF: f64 = 0.3;
/// Lower floor on `min λ₀/|ξ|_*²` over the standard scan grid.
pub const THETA0_FLOOR: f64 = 0.12;
/// Lower floor on `min λ₁` over the standard scan grid.
pub const GAP_FLOOR: f64 = 0.2;
/// Asymptotic check: deviation of `λ₀` from `ξ₁² + ½|ξ′|²` relative to `|ξ|_*²` at `|ξ|_* = 0.025`.
pub const ASYMPTOTIC_REL: f64 = 0.05;

/// Frame orthonormality.
pub const FRAME_ORTHONORMAL: f64 = 1e-14;
/// Spectral frame-derivative identities `∂₁J₁ + h = 0`, `∂₁h − J₁ = 0`.
pub const FRAME_DERIVATIVE: f64 = 1e-12;
/// `m ↔ u` roundtrip.
pub const ROUNDTRIP: f64 = 1e-12;
/// Sphere constraint `|h+m| = 1` accepted by `m_to_u`.
pub const SPHERE_INPUT: f64 = 1e-8;
/// Relative defect of the master identity `rhs_m·(J₁+iJ₂) = rhs_u`.
pub const MASTER_IDENTITY: f64 = 1e-8;
/// Smallness contract `sup|u| ≤ ½`.
pub const SMALLNESS: f64 = 0.5;

/// Parseval / reindexing identities on the box.
pub const PARSEVAL: f64 = 1e-12;
/// Semigroup law and commutation of `Q_L`/`Q_H` with the semigroup.
pub const SEMIGROUP: f64 = 1e-12;
/// Boundary-mass fraction that flags wrap-around on the periodic box.
pub const WRAP_FRACTION: f64 = 1e-6;
/// Width of the boundary strips (fraction of the box per side) used by the wrap diagnostic.
pub const WRAP_STRIP: f64 = 0.125;
/// Linear decay exponents (kernel scans and `Q_L` semigroup).
pub const LINEAR_DECAY_REL: f64 = 0.10;
/// Nonlinear decay exponents.
pub const NONLINEAR_DECAY_REL: f64 = 0.15;
/// Fit window start in units of `1/α`.
pub const FIT_START_ALPHA_T: f64 = 2.0;
/// Fit window end as a fraction of the wrap-around time.
pub const FIT_END_WRAP: f64 = 0.8;
/// Minimum number of samples accepted by a fit.
pub const FIT_MIN_SAMPLES: usize = 4;

/// Pre-renormalisation sphere defect that aborts an m-form step.
pub const SPHERE_STEP: f64 = 1e-6;
/// Pre-renormalisation defect that aborts a β-regularised step (the `−βΔ²m` term is not tangent
/// to the sphere, so that flow leaves it at first order in `β·dt`).
pub const SPHERE_STEP_REGULARIZED: f64 = 1e-2;
/// Sphere defect after renormalisation at every snapshot.
pub const SPHERE_SNAPSHOT: f64 = 1e-10;
/// Observed temporal order: `2.0 ± ORDER_TOL`.
pub const ORDER_TOL: f64 = 0.2;
/// Linear-regime fidelity over one damping time at amplitude ≤ 1e−6.
pub const LINEAR_FIDELITY: f64 = 1e-3;

/// Saturation of the running bound `M(t)`: growth over the last quarter of a run.
pub const M_PLATEAU_REL: f64 = 0.01;

/// Pointwise defect of the bulk energy identity.
pub const ENERGY_IDENTITY: f64 = 1e-10;
/// Residuals of the κ = ½ helical state identities.
pub const HALF_HELIX: f64 = 1e-12;
/// Hessian ratio `(E[h+m]−E[h]) / H[u]` at amplitude 1e−3.
pub const HESSIAN_RATIO: f64 = 0.01;
