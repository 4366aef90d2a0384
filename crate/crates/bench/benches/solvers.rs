use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nort::solver::{Gdpan, Momentum, PaSolver};
use nort::{Objective, Penalty, SolverConfig};
use nort_bench::synthetic;

/// Cost of one iteration after a short warm-up, so ranks have settled.
fn iteration(c: &mut Criterion) {
    let data = synthetic(250, 5, 1);
    let obj = Objective::uniform(data.train.clone(), 12.0, 2, Penalty::Lsp { theta: 1.0 }).unwrap();
    let cfg = SolverConfig {
        record_objective: false,
        ..SolverConfig::default()
    };
    let mut g = c.benchmark_group("iteration_250x250x5");
    g.sample_size(20);
    for (name, momentum) in [
        (
            "nort",
            Momentum::Adaptive {
                gamma1: 0.1,
                p: 0.5,
            },
        ),
        ("snort", Momentum::None),
    ] {
        let mut warm = PaSolver::new(&obj, cfg, momentum).unwrap();
        for _ in 0..10 {
            warm.step().unwrap();
        }
        g.bench_function(name, |b| {
            b.iter_batched(
                || warm.clone(),
                |mut s| s.step().map(|_| ()).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn dense_baseline(c: &mut Criterion) {
    let data = synthetic(100, 5, 1);
    let obj = Objective::uniform(data.train.clone(), 5.0, 2, Penalty::Lsp { theta: 1.0 }).unwrap();
    let cfg = SolverConfig {
        record_objective: false,
        ..SolverConfig::default()
    };
    let mut g = c.benchmark_group("iteration_100x100x5");
    g.sample_size(10);
    let mut gd = Gdpan::new(&obj, cfg).unwrap();
    gd.step().unwrap();
    g.bench_function("gdpan", |b| {
        b.iter_batched(
            || gd.clone(),
            |mut s| s.step().map(|_| ()).unwrap(),
            BatchSize::LargeInput,
        )
    });
    let mut sn = PaSolver::new(&obj, cfg, Momentum::None).unwrap();
    sn.step().unwrap();
    g.bench_function("snort", |b| {
        b.iter_batched(
            || sn.clone(),
            |mut s| s.step().map(|_| ()).unwrap(),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, iteration, dense_baseline);
criterion_main!(benches);
