use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use pmrec_core::loggen::{generate_corpus, Regime};
use pmrec_core::metalearn::train_forest;
use pmrec_core::quality::{escaping_edges_precision, token_replay};
use pmrec_core::{extract_features, AlgorithmId, EventLog};

fn log(regime: Regime, seed: u64, cases: usize) -> EventLog {
    pmrec_core::loggen::generate_log(&regime.config(seed, cases)).expect("valid config").0
}

fn discovery(c: &mut Criterion) {
    let log = log(Regime::ParallelHeavy, 11, 500);
    let mut g = c.benchmark_group("discover");
    for id in AlgorithmId::ALL {
        let algo = id.default_algorithm();
        g.bench_function(id.as_str(), |b| b.iter(|| algo.discover(&log).expect("discovers")));
    }
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let log = log(Regime::Noisy, 5, 500);
    let net = AlgorithmId::IM.default_algorithm().discover(&log).expect("discovers");
    c.bench_function("token_replay", |b| b.iter(|| token_replay(&log, &net)));
    c.bench_function("precision", |b| b.iter(|| escaping_edges_precision(&log, &net)));
}

fn features(c: &mut Criterion) {
    let log = log(Regime::ChoiceHeavy, 3, 1000);
    c.bench_function("extract_features_1k", |b| b.iter(|| extract_features("bench", &log).expect("finite")));
}

fn forest(c: &mut Criterion) {
    let corpus = generate_corpus(1, 40, 100).expect("corpus");
    let x: Vec<Vec<f64>> = corpus
        .iter()
        .map(|(id, _, l, _)| extract_features(id.clone(), l).expect("finite").values)
        .collect();
    let y: Vec<usize> = (0..x.len()).map(|i| i % 3).collect();
    let roster = [AlgorithmId::AM, AlgorithmId::HM, AlgorithmId::IM];
    c.bench_function("train_forest_40x92", |b| {
        b.iter_batched(
            || x.clone(),
            |x| train_forest(&x, &y, &roster, Default::default(), 7).expect("trains"),
            BatchSize::SmallInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = discovery, metrics, features, forest
}
criterion_main!(benches);
