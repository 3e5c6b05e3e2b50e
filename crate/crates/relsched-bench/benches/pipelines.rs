//! Criterion benchmarks of the main pipeline stages: the no-release driver,
//! the release-date exact fallback driver, and the two heavy primitives
//! (band program assembly and the shifting-grid transformer).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relsched_core::bands::{eptas_no_release, NRParams};
use relsched_core::oracle::OracleLimits;
use relsched_core::release::{self, ReleaseParams};
use relsched_core::{Instance, Job, Machine, ParamPack};

fn uniform_instance(seed: u64, n: usize, m: usize, releases: bool) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pack = ParamPack::practical(0.5).unwrap();
    let jobs = (0..n)
        .map(|id| Job {
            id,
            size: rng.gen_range(0.5..4.0),
            weight: rng.gen_range(0.5..4.0),
            release: if releases {
                pack.pow(rng.gen_range(0i64..=6))
            } else {
                0.0
            },
        })
        .collect();
    let machines = (0..m)
        .map(|id| Machine {
            id,
            speed: rng.gen_range(0.5..2.0),
        })
        .collect();
    Instance::new(jobs, machines, releases).unwrap()
}

fn bench_no_release(c: &mut Criterion) {
    let pack = ParamPack::practical(0.5).unwrap();
    let nr = NRParams::practical(&pack);
    let mut group = c.benchmark_group("no_release_pipeline");
    for &n in &[6usize, 10, 14] {
        let inst = uniform_instance(42 + n as u64, n, 3, false);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| eptas_no_release(inst, &pack, &nr).unwrap());
        });
    }
    group.finish();
}

fn bench_release_fallback(c: &mut Criterion) {
    let limits = OracleLimits {
        max_jobs: 5,
        max_machines: 2,
    };
    let mut group = c.benchmark_group("release_pipeline");
    for &n in &[3usize, 4, 5] {
        let inst = uniform_instance(7 + n as u64, n, 2, true);
        group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
            b.iter(|| release::eptas_release(inst, 0.75, &limits).unwrap());
        });
    }
    group.finish();
}

fn bench_release_shift(c: &mut Criterion) {
    let pack = ParamPack::practical_with_inv_delta(0.5, 2).unwrap();
    let inst = uniform_instance(11, 12, 3, true);
    let params = ReleaseParams::practical(&pack, &inst).unwrap();
    c.bench_function("release_shift_full_offset_sweep", |b| {
        b.iter(|| {
            for k in 0..params.k_count {
                release::release_shift(&inst, k, &params).unwrap();
            }
        });
    });
}

criterion_group!(
    benches,
    bench_no_release,
    bench_release_fallback,
    bench_release_shift
);
criterion_main!(benches);
