use helix_core::bloch::{self, BlochWavenumber};
use helix_core::tolerances as tol;
use helix_core::C64;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn lambdas(xi: BlochWavenumber, n: usize) -> Vec<f64> {
    bloch::bands(xi, tol::K_SCAN, n).unwrap().lambdas
}

/// Eigenvalues of the truncated operator assembled and solved densely.
fn dense(xi: BlochWavenumber, k: usize) -> Vec<f64> {
    let op = bloch::assemble_operator(xi, k).unwrap().to_dense();
    let n = op.len();
    let m = DMatrix::from_fn(n, n, |i, j| op[i][j]);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn frozen_reference_values() {
    // Dense eigensolve at K = 16.
    let l = bloch::bands(BlochWavenumber::d2(0.0, 0.1).unwrap(), tol::K_ORACLE, 0).unwrap().lambdas[0];
    assert!((l - 0.005_021_675_910_4).abs() < 1e-12, "{l}");
    assert!((lambdas(BlochWavenumber::d2(0.3, 0.0).unwrap(), 0)[0] - 0.09).abs() < 1e-13);
    assert!((lambdas(BlochWavenumber::d2(0.5, 0.0).unwrap(), 0)[0] - 0.25).abs() < 1e-13);
    let z = lambdas(BlochWavenumber::d2(0.0, 0.0).unwrap(), 4);
    for (a, e) in z.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn interlacing_at_fixed_transverse_wavenumbers() {
    for x2 in [0.0, 0.3, 1.0, 2.0] {
        let c = bloch::monotonicity_check(x2, 41, tol::K_SCAN).unwrap();
        assert!(c.passed(), "{c:?}");
    }
}

#[test]
fn truncation_is_converged_on_the_scan_range() {
    for (x1, x2) in [(0.0, 2.0), (0.25, -1.5), (0.5, 1.0)] {
        let xi = BlochWavenumber::d2(x1, x2).unwrap();
        let a = bloch::bands(xi, tol::K_SCAN, 4).unwrap().lambdas;
        let b = bloch::bands(xi, 2 * tol::K_SCAN, 4).unwrap().lambdas;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= tol::TRUNCATION, "{x} vs {y}");
        }
    }
}

#[test]
fn malformed_wavenumbers_are_rejected() {
    assert!(BlochWavenumber::d2(1.0, 0.0).is_err());
    assert!(BlochWavenumber::d2(f64::NAN, 0.0).is_err());
    assert!(bloch::uniform_grid_2d(0, -2.0, 2.0, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bands_are_symmetric(x1 in 0.0f64..1.0, x2 in -2.0f64..2.0) {
        let a = lambdas(BlochWavenumber::d2(x1, x2).unwrap(), 2);
        let b = lambdas(BlochWavenumber::wrapped(2, 1.0 - x1, &[x2]).unwrap(), 2);
        let c = lambdas(BlochWavenumber::d2(x1, -x2).unwrap(), 2);
        for n in 0..3 {
            prop_assert!((a[n] - b[n]).abs() <= tol::BAND_SYMMETRY);
            prop_assert!((a[n] - c[n]).abs() <= tol::BAND_SYMMETRY);
        }
    }

    #[test]
    fn d3_reduces_to_d2(x1 in 0.0f64..1.0, x2 in -2.0f64..2.0, x3 in -2.0f64..2.0) {
        let a = lambdas(BlochWavenumber::d3(x1, x2, x3).unwrap(), 2);
        let b = lambdas(BlochWavenumber::d2(x1, x2.hypot(x3)).unwrap(), 2);
        for n in 0..3 {
            prop_assert!((a[n] - b[n]).abs() <= tol::D3_REDUCTION);
        }
    }

    #[test]
    fn eigensolver_matches_dense_oracle(x1 in 0.0f64..1.0, x2 in -2.0f64..2.0, x3 in -2.0f64..2.0) {
        let xi = BlochWavenumber::d3(x1, x2, x3).unwrap();
        let ours = bloch::bands(xi, tol::K_ORACLE, 4).unwrap().lambdas;
        let oracle = dense(xi, tol::K_ORACLE);
        for n in 0..5 {
            prop_assert!((ours[n] - oracle[n]).abs() <= 1e-10, "{} vs {}", ours[n], oracle[n]);
        }
    }

    #[test]
    fn bands_are_ordered_and_bounded_below(x1 in 0.0f64..1.0, x2 in -2.0f64..2.0) {
        let xi = BlochWavenumber::d2(x1, x2).unwrap();
        let l = lambdas(xi, 2);
        prop_assert!(l[0] >= -1e-14 && l[0] <= l[1] && l[1] <= l[2]);
        prop_assert!(l[0] >= tol::THETA0_FLOOR * xi.reduced_dist().powi(2));
        prop_assert!(l[1] >= tol::GAP_FLOOR);
    }

    #[test]
    fn transverse_free_bands_are_shifted_squares(x1 in 0.0f64..1.0) {
        let l = lambdas(BlochWavenumber::d2(x1, 0.0).unwrap(), 4);
        let mut expect: Vec<f64> = (-4i64..=4).map(|k| (k as f64 + x1).powi(2)).collect();
        expect.sort_by(f64::total_cmp);
        for n in 0..5 {
            prop_assert!((l[n] - expect[n]).abs() <= 1e-12);
        }
    }

    #[test]
    fn lyapunov_schmidt_matches_eigensolve(r in 0.0f64..0.05, a in 0.0f64..std::f64::consts::TAU) {
        let xi = BlochWavenumber::wrapped(2, (r * a.cos()).rem_euclid(1.0), &[r * a.sin()]).unwrap();
        let ls = bloch::lyapunov_schmidt_lambda0(xi, tol::LS_TOL, tol::LS_MAX_ITER).unwrap();
        let eig = bloch::bands(xi, tol::K_ORACLE, 0).unwrap().lambdas[0];
        prop_assert!((ls.lambda0 - eig).abs() <= tol::LS_AGREEMENT);
    }

    #[test]
    fn profiles_are_normalised(x1 in 0.0f64..1.0, x2 in -2.0f64..2.0, n in 0usize..3) {
        let spec = bloch::bands(BlochWavenumber::d2(x1, x2).unwrap(), tol::K_SCAN, 2).unwrap();
        let m = 128;
        let xs: Vec<f64> = (0..m).map(|i| std::f64::consts::TAU * i as f64 / m as f64).collect();
        let p = bloch::eigenfunction_profile(&spec, n, &xs).unwrap();
        let integral: f64 = p.iter().map(C64::norm_sqr).sum::<f64>() * std::f64::consts::TAU / m as f64;
        prop_assert!((integral - 1.0).abs() <= 1e-10);
    }
}
