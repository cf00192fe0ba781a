use helix_core::evolution::{self, InitialKind, Integrator, Scheme, SimConfig, Termination};
use helix_core::hlxf::Snapshot;
use helix_core::tolerances as tol;

fn small(scheme: Scheme) -> SimConfig {
    let mut c = SimConfig { scheme, t_end: 10.0, dt: 0.05, snapshot_stride: 20, ..SimConfig::default() };
    c.grid.n_per = 16;
    c.initial.kind = InitialKind::Random;
    c.initial.amplitude = 0.05;
    c.initial.max_mode = 2;
    c
}

fn csv(c: &SimConfig) -> Vec<u8> {
    let integ = Integrator::new(c).unwrap();
    let rec = evolution::evolve_with(&integ, integ.initial_fields().unwrap()).unwrap();
    let mut out = Vec::new();
    rec.write_csv(&mut out).unwrap();
    out
}

#[test]
fn runs_are_bitwise_reproducible_across_thread_counts() {
    for scheme in [Scheme::EtdU, Scheme::ImexM] {
        let c = small(scheme);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| csv(&c));
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| csv(&c));
        assert_eq!(one, three, "{scheme:?}");
        assert_eq!(one, csv(&c));
    }
}

#[test]
fn schemes_agree_on_small_data() {
    let a = evolution::final_fields(&small(Scheme::EtdU)).unwrap().0;
    let mut c = small(Scheme::ImexM);
    c.dt = 0.005;
    let b = evolution::final_fields(&c).unwrap().0;
    let g = c.grid().unwrap();
    let d = evolution::m_distance(&a.m, &b.m, &g) / evolution::m_distance(&a.m, &helix_core::frame::zeros_vec(a.m[0].len()), &g);
    assert!(d < 1e-3, "{d}");
}

#[test]
fn final_state_snapshot_roundtrips() {
    let c = small(Scheme::ImexM);
    let integ = Integrator::new(&c).unwrap();
    let rec = evolution::evolve_with(&integ, integ.initial_fields().unwrap()).unwrap();
    assert_eq!(rec.termination, Termination::Completed);
    assert!(rec.max_sphere_defect <= tol::SPHERE_SNAPSHOT);
    let state = rec.final_state.as_ref().unwrap();
    let snap = Snapshot::from_fields(&c.grid().unwrap(), &state.fields).unwrap();
    let mut buf = Vec::new();
    snap.write(&mut buf).unwrap();
    assert_eq!(Snapshot::read(&buf[..]).unwrap(), snap);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = small(Scheme::EtdU);
    c.beta = 1e-3;
    assert!(Integrator::new(&c).is_err());
    c = small(Scheme::EtdU);
    c.d = 3;
    assert!(Integrator::new(&c).is_err());
    c = small(Scheme::EtdU);
    c.dt = -1.0;
    assert!(Integrator::new(&c).is_err());
}
