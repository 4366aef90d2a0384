mod common;

use common::*;
use nort::data::{
    report_without_timing, run_experiment, synth_generate, ExperimentConfig, ObsRule, SynthSpec,
};
use nort::io::{load_coo, load_dense, save_coo, save_dense};
use nort::Shape3;

const SMALL: &str = "\
[data]
source = synth
dims = 20 15 4
rank = 2
observed = 0.4
noise_std = 0.01
seed = 9

[solver]
name = nort
reg = lsp
lambda = 0.2, 0.8
theta = 1
max_iters = 25
parallel_modes = false
";

#[test]
fn synthetic_counts_follow_the_log_rule() {
    let spec = SynthSpec {
        dims: [60, 50, 5],
        seed: 4,
        ..SynthSpec::default()
    };
    let d = synth_generate(&spec).unwrap();
    let expect = ObsRule::LogRule
        .count(Shape3::new(60, 50, 5).unwrap())
        .unwrap();
    assert_eq!(expect, (115.0 * 5.0 * 15_000f64.ln() / 5.0) as usize);
    assert_eq!(d.train.nnz() + d.val.nnz(), expect);
    assert_eq!(d.train.nnz(), (expect as f64 * 0.5).round() as usize);
    assert_eq!(d.test.nnz(), 15_000 - expect);
    // Test entries are the noise-free truth.
    for (idx, v) in d.test.iter() {
        assert_eq!(v, d.truth.get(idx));
    }
    let noise: Vec<f64> = d.train.iter().map(|(i, v)| v - d.truth.get(i)).collect();
    let std = (noise.iter().map(|e| e * e).sum::<f64>() / noise.len() as f64).sqrt();
    assert!((std - 0.1).abs() < 0.02, "noise std {std}");
}

#[test]
fn synthetic_data_is_seeded() {
    let spec = SynthSpec {
        dims: [10, 9, 3],
        observed: ObsRule::Fraction(0.5),
        seed: 21,
        ..SynthSpec::default()
    };
    let a = synth_generate(&spec).unwrap();
    let b = synth_generate(&spec).unwrap();
    assert_eq!(a.train.values(), b.train.values());
    assert_eq!(a.train.indices(), b.train.indices());
    let c = synth_generate(&SynthSpec { seed: 22, ..spec }).unwrap();
    assert_ne!(a.truth.as_slice(), c.truth.as_slice());
}

#[test]
fn experiment_reports_are_reproducible() {
    let cfg = ExperimentConfig::from_text(SMALL).unwrap();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(report_without_timing(&a), report_without_timing(&b));
    assert_eq!(a.cells.len(), 2);
    let best = a.best_cell().unwrap();
    let min_val = a
        .cells
        .iter()
        .filter_map(|c| c.val_rmse)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.val_rmse, Some(min_val));
    assert_eq!(a.best_test_rmse, best.test_rmse);
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let shape = Shape3::new(7, 6, 5).unwrap();
    let mut r = rng(8);
    let s = random_sparse(shape, 40, &mut r);
    let p = dir.path().join("s.coo");
    save_coo(&s, &p).unwrap();
    let back = load_coo(&p).unwrap();
    assert_eq!(back.indices(), s.indices());
    assert_eq!(back.values(), s.values());

    let d = random_point(shape, 3, 2, &mut r).to_dense();
    let p = dir.path().join("d.dt3");
    save_dense(&d, &p).unwrap();
    assert_eq!(load_dense(&p).unwrap().as_slice(), d.as_slice());
}
