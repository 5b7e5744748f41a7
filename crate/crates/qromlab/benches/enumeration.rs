use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qromlab::par::Parallelism;
use qromlab::pipeline::{run_theorem, verify_lemma, ExperimentConfig};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn lemmas(c: &mut Criterion) {
    let mut g = c.benchmark_group("lemma");
    g.sample_size(10);
    for name in ["zhandry", "mar"] {
        for (label, mode) in MODES {
            g.bench_with_input(BenchmarkId::new(name, label), &mode, |b, &mode| b.iter(|| verify_lemma(name, mode).unwrap()));
        }
    }
    g.finish();
}

fn pipelines(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for name in ["constant-round", "three-round"] {
        for (label, mode) in MODES {
            let cfg = ExperimentConfig { reps: 1, mode, ..Default::default() };
            g.bench_with_input(BenchmarkId::new(name, label), &cfg, |b, cfg| b.iter(|| run_theorem(name, cfg).unwrap()));
        }
    }
    g.finish();
}

criterion_group!(benches, lemmas, pipelines);
criterion_main!(benches);
