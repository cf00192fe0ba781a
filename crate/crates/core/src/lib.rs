//! Numerical laboratory for the stability of the helical state `h = (0, cos x₁, sin x₁)`
//! of the Landau–Lifshitz–Gilbert equation with Dzyaloshinskii–Moriya interaction.
//!
//! The crate is organised bottom-up:
//!
//! * [`tridiag`] — symmetric tridiagonal eigensolver (Sturm bisection + inverse iteration).
//! * [`bloch`] — quasi-momentum operators `A_ξ`, band functions, Lyapunov–Schmidt oracle.
//! * [`grid`] — periodic boxes, FFTs and spectral derivatives.
//! * [`frame`] — helical states, the moving frame, m/u conversions and nonlinear terms.
//! * [`propagator`] — discrete Bloch decomposition, semigroup, `Q_L`/`Q_H`, kernel `G_L`.
//! * [`evolution`] — exponential and IMEX time steppers for the perturbation dynamics.
//! * [`diagnostics`] — norms, `M` functionals, decay fits and energy identities.
//! * [`studies`] — experiment drivers (linear decay, kernel scans, high-frequency decay).
//! * [`tolerances`] — the single table of default tolerances used by every verdict.

pub mod bloch;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod frame;
pub mod grid;
pub mod hlxf;
pub mod par;
pub mod propagator;
pub mod studies;
pub mod tolerances;
pub mod tridiag;

pub use error::{HelixError, Result};
pub use num_complex::Complex64 as C64;
