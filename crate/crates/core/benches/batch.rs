use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use structural_conflict::batch::{distance_profiles, iterate_many, Execution};
use structural_conflict::dynamics::{ConflictSystem, IterateOptions, RecordPolicy};
use structural_conflict::measures::MatrixKind;
use structural_conflict::random;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn trajectories(c: &mut Criterion) {
    let mut rng = random::seeded(11);
    let pairs: Vec<_> = (0..64)
        .map(|_| random::level_pair(&mut rng, 4, 4).unwrap())
        .collect();
    let system = ConflictSystem::default();
    let options = IterateOptions {
        record: RecordPolicy::Endpoints,
        ..IterateOptions::default()
    };
    let mut group = c.benchmark_group("iterate_many/64x256");
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| iterate_many(mode, &system, &pairs, &options))
        });
    }
    group.finish();
}

fn profiles(c: &mut Criterion) {
    let mut rng = random::seeded(12);
    let pairs: Vec<_> = (0..32)
        .map(|_| {
            (
                random::structure_matrix(&mut rng, MatrixKind::Similar, 4, 7).unwrap(),
                random::structure_matrix(&mut rng, MatrixKind::Similar, 4, 7).unwrap(),
            )
        })
        .collect();
    let mut group = c.benchmark_group("distance_profiles/32xk7");
    group.sample_size(20);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| distance_profiles(mode, &pairs, 7))
        });
    }
    group.finish();
}

criterion_group!(benches, trajectories, profiles);
criterion_main!(benches);
