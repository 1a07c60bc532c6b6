use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use observer_kit_core::numerics;
use observer_kit_core::random::{self, Instance, ModelFamily};
use observer_kit_core::sim::{self, SimulationConfig};
use observer_kit_core::{synth, verify, Matrix, SynthesisParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(n: usize, nodes: usize, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random::jointly_observable_instance(&mut rng, ModelFamily::PartitionedOutputs, (n, n), (nodes, nodes), (0.5, 2.0))
}

fn synthesis(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthesize");
    for (n, nodes) in [(2, 2), (4, 3), (6, 5)] {
        let inst = instance(n, nodes, 7);
        let params = SynthesisParams::new(1.0);
        group.bench_with_input(BenchmarkId::from_parameter(format!("n{n}_N{nodes}")), &inst, |b, inst| {
            b.iter(|| synth::synthesize(black_box(&inst.model), &inst.graph, &params).unwrap())
        });
    }
    group.finish();
}

fn certification(c: &mut Criterion) {
    let inst = instance(6, 5, 11);
    let design = synth::synthesize(&inst.model, &inst.graph, &SynthesisParams::new(1.0)).unwrap().design;
    c.bench_function("certify/n6_N5", |b| {
        b.iter(|| verify::certify(black_box(&inst.model), &inst.graph, &design, 1.0).unwrap())
    });
}

fn lyapunov(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_lyapunov");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [4, 16, 32] {
        let raw = Matrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..=1.0));
        let f = raw - Matrix::identity(dim, dim) * (dim as f64);
        let q = Matrix::identity(dim, dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &f, |b, f| {
            b.iter(|| numerics::solve_lyapunov(black_box(f), &q).unwrap())
        });
    }
    group.finish();
}

fn integration(c: &mut Criterion) {
    let inst = instance(4, 3, 5);
    let design = synth::synthesize(&inst.model, &inst.graph, &SynthesisParams::new(1.0)).unwrap().design;
    let config = SimulationConfig {
        t_final: 1.0,
        ..SimulationConfig::default()
    };
    c.bench_function("integrate/n4_N3_1000_steps", |b| {
        b.iter(|| sim::integrate(black_box(&config), &inst.model, &inst.graph, &design).unwrap())
    });
}

criterion_group!(benches, synthesis, certification, lyapunov, integration);
criterion_main!(benches);
