// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, Criterion};
use fracbump::ground_state::{compute_ground_state, GroundStateOptions};
use fracbump::reduction::{FixedPointOptions, LinearSolveOptions, ProblemSpec, RingSetup};
use fracbump::ansatz::PotentialSpec;
use fracbump::GridSpec;
use fracbump_bench::{desk_ground_state, half};

fn ground_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground_state");
    group.sample_size(10);
    let g = GridSpec::new(1, 200.0, 8192).unwrap();
    group.bench_function("N1_8192", |b| {
        b.iter(|| compute_ground_state(g, half(), 2.0, GroundStateOptions::default()).unwrap())
    });
    group.bench_function("N2_192", |b| b.iter(|| desk_ground_state(192)));
    group.finish();
}

fn projected_solve(c: &mut Criterion) {
    let gs = desk_ground_state(256);
    let profile = gs.radial_profile().unwrap();
    let spec = ProblemSpec {
        s: half(),
        p: 2.0,
        potential: PotentialSpec::new(1.0, 1.2),
        sigma: 0.05,
        spacing: 0.125,
        margin: 8.0,
        linear: LinearSolveOptions::default(),
        fixed_point: FixedPointOptions::default(),
    };
    let setup = RingSetup::ring(&profile, &spec, 6, 3.3, 2).unwrap();
    let mut group = c.benchmark_group("reduction");
    group.sample_size(10);
    group.bench_function("linear_k6", |b| b.iter(|| setup.solver.solve(&setup.defect, None).unwrap()));
    group.bench_function("fixed_point_k6", |b| b.iter(|| setup.correction(spec.fixed_point).unwrap()));
    group.finish();
}

criterion_group!(benches, ground_state, projected_solve);
criterion_main!(benches);
