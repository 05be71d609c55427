use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ghzkit::bell::{default_functional, lhv_max_bruteforce};
use ghzkit::qudit::{principal_eigenpair, DimProfile, Operator};
use ghzkit::seesaw::{seesaw_restart, SeesawConfig};
use ghzkit::states::{ghz_state, isotropic_mix, GhzParams};

fn lhv(c: &mut Criterion) {
    let f = default_functional().unwrap();
    c.bench_function("lhv_bruteforce_333", |b| b.iter(|| lhv_max_bruteforce(black_box(&f)).unwrap()));
}

fn seesaw(c: &mut Criterion) {
    let f = default_functional().unwrap();
    let config = SeesawConfig { parallel: false, ..SeesawConfig::default() };
    let mut group = c.benchmark_group("seesaw_restart");
    group.sample_size(20);
    for dims in [[2, 2, 2], [2, 3, 3], [3, 3, 3]] {
        let profile = DimProfile::new(dims.to_vec()).unwrap();
        group.bench_function(format!("{dims:?}"), |b| {
            b.iter(|| seesaw_restart(&f, &profile, &config, black_box(3)).unwrap())
        });
    }
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let psi = ghz_state(GhzParams::new(4, 3).unwrap());
    let rho = isotropic_mix(&psi, 0.9).unwrap();
    let op = Operator::new(psi.profile().clone(), rho.matrix().clone()).unwrap();
    c.bench_function("principal_eigenpair_81", |b| b.iter(|| principal_eigenpair(black_box(&op)).unwrap()));
}

criterion_group!(benches, lhv, seesaw, eigen);
criterion_main!(benches);
