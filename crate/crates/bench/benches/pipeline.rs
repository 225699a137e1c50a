//! Criterion benchmarks for the hot paths: feature assembly, tree/ensemble
//! fitting, and prediction.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use stormloss::features::{assemble, standardize_all, AssembleOptions};
use stormloss::ingest::generate_synthetic;
use stormloss::models::{
    fit_gbm, fit_random_forest, fit_xgb, ForestConfig, GbmConfig, XgbConfig,
};
use stormloss::Seed;

fn fixture(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let bundle = generate_synthetic(Seed(42), n, 6, 0.3).unwrap();
    let assembled = assemble(&bundle, AssembleOptions::default()).unwrap();
    let (scaled, _) = standardize_all(&assembled).unwrap();
    (scaled.rows().to_vec(), scaled.target().to_vec())
}

fn bench_assemble(c: &mut Criterion) {
    let bundle = generate_synthetic(Seed(42), 1000, 6, 0.3).unwrap();
    c.bench_function("assemble_1000_zctas", |b| {
        b.iter(|| assemble(black_box(&bundle), AssembleOptions::default()).unwrap())
    });
}

fn bench_fit(c: &mut Criterion) {
    let (x, y) = fixture(500);
    c.bench_function("gbm_fit_500x100", |b| {
        b.iter(|| fit_gbm(black_box(&x), black_box(&y), GbmConfig::default(), Seed(1)).unwrap())
    });
    c.bench_function("xgb_fit_500x100", |b| {
        b.iter(|| fit_xgb(black_box(&x), black_box(&y), XgbConfig::default(), Seed(1)).unwrap())
    });
    c.bench_function("forest_fit_500x100", |b| {
        b.iter(|| {
            fit_random_forest(black_box(&x), black_box(&y), ForestConfig::default(), Seed(1))
                .unwrap()
        })
    });
}

fn bench_predict(c: &mut Criterion) {
    let (x, y) = fixture(500);
    let model = fit_gbm(&x, &y, GbmConfig::default(), Seed(1)).unwrap();
    c.bench_function("gbm_predict_500", |b| {
        b.iter_batched(
            || x.clone(),
            |rows| rows.iter().map(|r| model.predict_row(r)).sum::<f64>(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_assemble, bench_fit, bench_predict);
criterion_main!(benches);
