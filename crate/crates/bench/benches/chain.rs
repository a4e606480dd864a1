use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use frtpp_bench::dataset;
use frtpp_core::rng::{sample_truncated_normal, TruncationSide};
use frtpp_core::{
    derive_stream, frt_pp_pvalue, run_tests, ChainConfig, GibbsSampler, ImputationPosture, Predictiveness, Priors,
    StatKind, TestKind, TestOptions,
};

fn gibbs_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("gibbs_sweep");
    for (name, pred, method) in [("m2_none", Predictiveness::None, 2), ("m4_high", Predictiveness::High, 4)] {
        let data = dataset(pred, 0.0);
        let sampler = GibbsSampler::new(&data, ImputationPosture::method(method).unwrap(), Priors::default()).unwrap();
        let mut stream = derive_stream(1, name);
        let mut state = sampler.initial_state(&mut stream);
        group.bench_function(name, |b| b.iter(|| sampler.step(black_box(&mut state), &mut stream)));
    }
    group.finish();
}

fn p_values(c: &mut Criterion) {
    let data = dataset(Predictiveness::None, 0.0);
    let posture = ImputationPosture::method(2).unwrap();
    let chain = ChainConfig::new(1000, 500, 0).unwrap();
    let stream = derive_stream(3, "pvalue");
    let mut group = c.benchmark_group("p_value");
    group.sample_size(10);
    group.bench_function("frt_pp_disc_1000", |b| {
        b.iter(|| frt_pp_pvalue(black_box(&data), &posture, StatKind::Discrepancy, &chain, &stream).unwrap())
    });
    let kinds = [TestKind::Statistic, TestKind::Discrepancy, TestKind::ModelBased];
    group.bench_function("shared_chain_three_kinds_1000", |b| {
        b.iter(|| run_tests(black_box(&data), &posture, &kinds, &chain, &TestOptions::default(), &stream).unwrap())
    });
    group.finish();
}

fn truncated_normal(c: &mut Criterion) {
    let mut group = c.benchmark_group("truncated_normal");
    for (name, mean) in [("centre", 0.0), ("tail_8sd", -8.0)] {
        let mut s = derive_stream(5, name);
        group.bench_function(name, |b| {
            b.iter(|| sample_truncated_normal(&mut s, black_box(mean), 1.0, TruncationSide::Above0))
        });
    }
    group.finish();
}

criterion_group!(benches, gibbs_sweep, p_values, truncated_normal);
criterion_main!(benches);
