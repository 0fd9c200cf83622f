use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use qsynth_bench::{load, random, BELL_GHZ3, DISCONNECTED_B};
use qsynth_core::circuit::AngleSet;
use qsynth_core::eval::{Evaluator, FactoredEvaluator};
use qsynth_core::proposer::{hillclimb_mutate, MoveWeights};
use qsynth_core::sim::{meyer_wallach, qubit_purities, simulate, simulate_with_precision};
use qsynth_core::{curate, parse, serialize};

fn dense(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    for n in [10, 16, 20] {
        let circuit = random(n, 40, 1);
        group.bench_with_input(BenchmarkId::new("f64", n), &circuit, |b, c| {
            b.iter(|| simulate(black_box(c)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("f32", n), &circuit, |b, c| {
            b.iter(|| simulate_with_precision::<f32>(black_box(c)).unwrap())
        });
    }
    group.finish();
}

fn purities(c: &mut Criterion) {
    let mut group = c.benchmark_group("purities");
    group.sample_size(20);
    for n in [16, 20] {
        let state = simulate(&random(n, 40, 2)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &state, |b, s| {
            b.iter(|| qubit_purities(black_box(s)))
        });
    }
    group.finish();
}

fn factored(c: &mut Criterion) {
    let mut group = c.benchmark_group("factored");
    for (name, raw) in [("bell_ghz3", BELL_GHZ3), ("disconnected_b", DISCONNECTED_B)] {
        let circuit = load(raw);
        group.bench_function(name, |b| {
            b.iter(|| FactoredEvaluator.evaluate(black_box(&circuit)).unwrap())
        });
    }
    let circuit = random(25, 25, 3);
    group.bench_function("random_25x25", |b| {
        b.iter(|| FactoredEvaluator.evaluate(black_box(&circuit)).unwrap())
    });
    group.finish();
}

fn text(c: &mut Criterion) {
    let circuit = random(25, 45, 4);
    let listing = serialize(&circuit);
    let wrapped = format!("Sure!\n<python>\n```python\n{listing}\n```\n</python>");
    c.bench_function("serialize", |b| b.iter(|| serialize(black_box(&circuit))));
    c.bench_function("curate+parse", |b| {
        b.iter(|| parse(&curate(black_box(&wrapped)).unwrap(), 25).unwrap())
    });
}

fn mutate(c: &mut Criterion) {
    let circuit = random(25, 25, 5);
    let angles = AngleSet::default();
    let weights = MoveWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    c.bench_function("hillclimb_mutate", |b| {
        b.iter(|| hillclimb_mutate(black_box(&circuit), &angles, &weights, &mut rng))
    });
    let small = random(12, 25, 6);
    c.bench_function("mutate+evaluate_12", |b| {
        b.iter(|| {
            let next = hillclimb_mutate(&small, &angles, &weights, &mut rng);
            meyer_wallach(&simulate(&next).unwrap()).q
        })
    });
}

criterion_group!(benches, dense, purities, factored, text, mutate);
criterion_main!(benches);
