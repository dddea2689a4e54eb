use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use treesample_core::{
    build_transition_model, derive_params, Chain, ChainConfig, EnergyParams, PlaneTree, BUILTIN_PARAM_SETS,
};

fn chain_steps(c: &mut Criterion) {
    let params = derive_params(&BUILTIN_PARAM_SETS[4].nntm);
    let mut group = c.benchmark_group("chain_step");
    group.throughput(Throughput::Elements(10_000));
    for m in [10usize, 100, 1000] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            let mut chain = Chain::new(&ChainConfig::new(m, params, 7)).unwrap();
            chain.advance(100 * m as u64);
            b.iter(|| chain.advance(black_box(10_000)));
        });
    }
    group.finish();
}

fn decode(c: &mut Criterion) {
    let mut group = c.benchmark_group("decode");
    for m in [100usize, 10_000] {
        let mut chain = Chain::new(&ChainConfig::new(m, EnergyParams::default(), 3)).unwrap();
        chain.advance(50 * m as u64);
        let x = chain.state();
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &x, |b, x| {
            b.iter(|| PlaneTree::decode(black_box(x)))
        });
    }
    group.finish();
}

fn transition_model(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_transition_model");
    group.sample_size(10);
    for m in [4usize, 6, 8] {
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, &m| {
            b.iter(|| build_transition_model(black_box(m), &EnergyParams::new(1.0, -1.0)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, chain_steps, decode, transition_model);
criterion_main!(benches);
