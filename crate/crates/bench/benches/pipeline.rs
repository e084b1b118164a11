use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use gazekit_bench::{model, small_dataset};
use gazekit_core::acquisition::label_gaze;
use gazekit_core::eval::mollweide_project;
use gazekit_core::regressor::{batch_gradient, ModelKind};
use gazekit_core::simulator::{simulate_session, SessionConfig};

fn labelling(c: &mut Criterion) {
    let cfg = SessionConfig::default();
    let session = simulate_session(&cfg, 0).unwrap();
    let rig = cfg.rig();
    c.bench_function("simulate_session", |b| b.iter(|| simulate_session(black_box(&cfg), 0).unwrap()));
    c.bench_function("label_session", |b| {
        b.iter(|| {
            session
                .records
                .iter()
                .filter(|r| label_gaze(&r.detection, &r.marker, &cfg.board, &rig).is_ok())
                .count()
        })
    });
}

fn projection(c: &mut Criterion) {
    let pts: Vec<(f64, f64)> = (0..1000).map(|i| ((i as f64 * 0.37).sin() * 3.1, (i as f64 * 0.11).cos() * 1.5)).collect();
    c.bench_function("mollweide_1000", |b| {
        b.iter(|| pts.iter().map(|&(y, p)| mollweide_project(y, p).unwrap().0).sum::<f64>())
    });
}

fn models(c: &mut Criterion) {
    let data = small_dataset();
    let batch: Vec<usize> = (0..64).collect();
    let mut group = c.benchmark_group("batch_gradient_64");
    for kind in ModelKind::ALL {
        let params = model(kind);
        group.bench_function(kind.name(), |b| {
            b.iter(|| batch_gradient(&params, &data.train, &batch, None).unwrap())
        });
    }
    group.finish();
    let params = model(ModelKind::Lstm);
    let frames = data.test.window_features(0);
    c.bench_function("lstm_predict", |b| b.iter(|| params.predict(black_box(&frames)).unwrap()));
}

criterion_group!(benches, labelling, projection, models);
criterion_main!(benches);
