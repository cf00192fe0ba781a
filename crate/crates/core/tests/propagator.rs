use helix_core::grid::{gaussian, Grid, Spectral, SpectralField};
use helix_core::propagator::{self, BlockLayout, CacheMode, PropagatorCache};
use helix_core::tolerances as tol;
use helix_core::{frame, C64};
use proptest::prelude::*;
use std::sync::OnceLock;

fn setups() -> &'static [(Spectral, PropagatorCache); 2] {
    static S: OnceLock<[(Spectral, PropagatorCache); 2]> = OnceLock::new();
    S.get_or_init(|| {
        let g1 = Grid::helical(8, 8, &[]).unwrap();
        let g2 = Grid::helical(4, 8, &[(16, 24.0)]).unwrap();
        [(Spectral::new(g1), PropagatorCache::new(g1).unwrap()), (Spectral::new(g2), PropagatorCache::new(g2).unwrap())]
    })
}

fn field(sp: &Spectral, seed: u64) -> SpectralField {
    SpectralField::from_values(sp, &frame::random_smooth_u(&sp.grid, seed, 0.3, 3))
}

fn rel_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    let num: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.coeffs.iter().map(C64::norm_sqr).sum();
    (num / den.max(1e-300)).sqrt()
}

#[test]
fn box_propagator_rejects_d3() {
    let g = Grid::helical(1, 8, &[(4, 4.0), (4, 5.0)]).unwrap();
    assert!(PropagatorCache::new(g).is_err());
    assert!(PropagatorCache::build(Grid::helical(2, 8, &[]).unwrap(), 0.7, CacheMode::Full).is_err());
}

#[test]
fn every_block_reproduces_the_operator() {
    let layout = BlockLayout::new(Grid::helical(4, 8, &[(8, 12.0)]).unwrap()).unwrap();
    for b in 0..layout.nblocks() {
        assert!(propagator::block_operator_matches(&layout, b).unwrap());
    }
}

#[test]
fn high_part_decays_faster_than_low_part() {
    let (sp, cache) = &setups()[1];
    let v = SpectralField::from_values(sp, &gaussian(&sp.grid, C64::new(1.0, 0.0), 1.0));
    let (lo, hi) = (cache.project_low(&v).unwrap(), cache.project_high(&v).unwrap());
    let t = 40.0;
    let rl = cache.apply_semigroup(&lo, t, 1.0).unwrap().l2_sq() / lo.l2_sq();
    let rh = cache.apply_semigroup(&hi, t, 1.0).unwrap().l2_sq() / hi.l2_sq();
    assert!(rh < rl, "{rh} vs {rl}");
    assert!(rh <= (-2.0 * t * cache.high_floor().unwrap()).exp() * (1.0 + 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bloch_decomposition_is_parseval(which in 0usize..2, seed in 0u64..1000) {
        let (sp, cache) = &setups()[which];
        let v = field(sp, seed);
        let layout = BlockLayout::new(sp.grid).unwrap();
        let dec = propagator::bloch_decompose(&v, &layout).unwrap();
        let back = propagator::bloch_reassemble(&dec, &layout).unwrap();
        prop_assert!(rel_diff(&v, &back) <= tol::PARSEVAL);
        let e = cache.to_eigen(&v.coeffs).unwrap();
        let norm_e: f64 = e.iter().map(C64::norm_sqr).sum();
        let norm_v: f64 = v.coeffs.iter().map(C64::norm_sqr).sum();
        prop_assert!((norm_e - norm_v).abs() <= tol::PARSEVAL * norm_v);
    }

    #[test]
    fn semigroup_property(which in 0usize..2, seed in 0u64..1000, t in 0.0f64..5.0, s in 0.0f64..5.0, alpha in 0.1f64..2.0) {
        let (sp, cache) = &setups()[which];
        let v = field(sp, seed);
        let once = cache.apply_semigroup(&v, t + s, alpha).unwrap();
        let twice = cache.apply_semigroup(&cache.apply_semigroup(&v, s, alpha).unwrap(), t, alpha).unwrap();
        prop_assert!(rel_diff(&once, &twice) <= tol::SEMIGROUP);
        // Contraction in L².
        prop_assert!(once.l2_sq() <= v.l2_sq() * (1.0 + 1e-12));
    }

    #[test]
    fn projections_split_the_identity(which in 0usize..2, seed in 0u64..1000) {
        let (sp, cache) = &setups()[which];
        let v = field(sp, seed);
        let mut sum = cache.project_low(&v).unwrap();
        sum.axpy(C64::new(1.0, 0.0), &cache.project_high(&v).unwrap());
        prop_assert!(rel_diff(&v, &sum) <= 1e-12);
        let lo = cache.project_low(&v).unwrap();
        prop_assert!(cache.project_low(&lo).unwrap().l2_sq() <= lo.l2_sq() * (1.0 + 1e-12));
    }

    #[test]
    fn a_is_nonnegative(which in 0usize..2, seed in 0u64..1000) {
        let (sp, cache) = &setups()[which];
        prop_assert!(cache.a_quadratic(&field(sp, seed)).unwrap() >= -1e-12);
    }
}
