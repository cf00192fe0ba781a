//! Data-parallel core versus a single worker. With the default `parallel` feature the
//! "sequential" group runs the rayon code paths inside a one-thread pool; building with
//! `--no-default-features` replaces them by the plain sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use helix_core::bloch;
use helix_core::evolution::{self, Integrator, SimConfig};
use helix_core::grid::{gaussian, Grid, Spectral, SpectralField};
use helix_core::propagator::PropagatorCache;
use helix_core::tolerances as tol;
use helix_core::C64;
use std::hint::black_box;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = rayon::current_num_threads();
    let mut v = vec![("sequential".to_string(), rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap())];
    v.push((format!("parallel-{all}"), rayon::ThreadPoolBuilder::new().num_threads(all).build().unwrap()));
    v
}

fn band_scan(c: &mut Criterion) {
    let grid = bloch::uniform_grid_2d(16, -2.0, 2.0, 16).unwrap();
    let mut g = c.benchmark_group("band_scan_16x16");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(bloch::band_scan(&grid, tol::K_SCAN).unwrap())))
        });
    }
    g.finish();
}

fn semigroup(c: &mut Criterion) {
    let grid = Grid::helical(16, 8, &[(128, 200.0)]).unwrap();
    let sp = Spectral::new(grid);
    let cache = PropagatorCache::new(grid).unwrap();
    let v = SpectralField::from_values(&sp, &gaussian(&grid, C64::new(1.0, 0.0), 1.0));
    let mut g = c.benchmark_group("semigroup_d2");
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(cache.apply_semigroup(&v, 10.0, 1.0).unwrap())))
        });
    }
    g.finish();
}

fn etd_run(c: &mut Criterion) {
    let mut cfg = SimConfig::for_dimension(2);
    cfg.grid.n_per = 8;
    cfg.grid.n2 = 64;
    cfg.t_end = 10.0;
    cfg.snapshot_stride = 10;
    let integ = Integrator::new(&cfg).unwrap();
    let init = integ.initial_fields().unwrap();
    let mut g = c.benchmark_group("etd_u_d2_10_steps");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(evolution::evolve_with(&integ, init.clone()).unwrap())))
        });
    }
    g.finish();
}

criterion_group!(benches, band_scan, semigroup, etd_run);
criterion_main!(benches);
