//! Seeded fixtures shared by the benchmarks.

use std::sync::Arc;

use nalgebra::DMatrix;
use nort::data::{synth_generate, SynthData, SynthSpec};
use nort::{FactorPair, FactorTensor, Mode, Shape3, SparseTensor3, SplrOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// A rank-`k` pair folded along `mode`.
pub fn random_pair(shape: Shape3, mode: Mode, k: usize, seed: u64) -> FactorPair {
    let mut r = rng(seed);
    let u = random_matrix(shape.dim(mode), k, &mut r);
    let v = random_matrix(shape.unfolded_cols(mode), k, &mut r);
    FactorPair::new(mode, shape, u, v).expect("consistent factor shapes")
}

/// `nnz` distinct random entries.
pub fn random_sparse(shape: Shape3, nnz: usize, seed: u64) -> SparseTensor3 {
    let mut r = rng(seed);
    let picks = rand::seq::index::sample(&mut r, shape.numel(), nnz.min(shape.numel()));
    let entries = picks
        .into_iter()
        .map(|l| (shape.delinear(l), r.random_range(-1.0..1.0)))
        .collect();
    SparseTensor3::from_entries(shape, entries).expect("distinct entries")
}

/// An iterate-shaped operator: one rank-`k` pair on each of the first `d`
/// modes averaged with weight `1/d`, plus a sparse term on `nnz` entries.
pub fn iterate_operator(shape: Shape3, d: usize, k: usize, nnz: usize, seed: u64) -> SplrOperator {
    let terms = Mode::ALL
        .into_iter()
        .take(d)
        .enumerate()
        .map(|(i, m)| {
            (
                1.0 / d as f64,
                Arc::new(random_pair(shape, m, k, seed + i as u64)),
            )
        })
        .collect();
    let low = FactorTensor::new(shape, terms).expect("shared shape");
    SplrOperator::new(low, Some((-0.3, random_sparse(shape, nnz, seed + 10))))
        .expect("valid operator")
}

/// The synthetic protocol at `n x n x i3`.
pub fn synthetic(n: usize, i3: usize, seed: u64) -> SynthData {
    synth_generate(&SynthSpec {
        dims: [n, n, i3],
        seed,
        ..SynthSpec::default()
    })
    .expect("valid synthetic spec")
}
