//! Seeded generators and dense oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use nort::{FactorPair, FactorTensor, Mode, Penalty, Shape3, SparseTensor3, SplrOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_shape(r: &mut ChaCha8Rng, max: [usize; 3]) -> Shape3 {
    Shape3::new(
        r.random_range(1..=max[0]),
        r.random_range(1..=max[1]),
        r.random_range(1..=max[2]),
    )
    .unwrap()
}

pub fn random_pair(shape: Shape3, mode: Mode, k: usize, r: &mut ChaCha8Rng) -> FactorPair {
    let u = random_matrix(shape.dim(mode), k, r);
    let v = random_matrix(shape.unfolded_cols(mode), k, r);
    FactorPair::new(mode, shape, u, v).unwrap()
}

pub fn random_sparse(shape: Shape3, nnz: usize, r: &mut ChaCha8Rng) -> SparseTensor3 {
    let picks = rand::seq::index::sample(r, shape.numel(), nnz.min(shape.numel())).into_vec();
    let entries = picks
        .into_iter()
        .map(|l| (shape.delinear(l), r.random_range(-1.0..1.0)))
        .collect();
    SparseTensor3::from_entries(shape, entries).unwrap()
}

/// One factor per mode with rank up to `max_rank`, random coefficients, and
/// a sparse term on about a quarter of the entries.
pub fn random_operator(shape: Shape3, max_rank: usize, r: &mut ChaCha8Rng) -> SplrOperator {
    let terms = Mode::ALL
        .into_iter()
        .map(|m| {
            let k = r.random_range(0..=max_rank);
            (
                r.random_range(-1.0..1.0),
                Arc::new(random_pair(shape, m, k, r)),
            )
        })
        .collect();
    let low = FactorTensor::new(shape, terms).unwrap();
    let nnz = (shape.numel() / 4).max(1);
    let coeff = r.random_range(-1.0..1.0);
    SplrOperator::new(low, Some((coeff, random_sparse(shape, nnz, r)))).unwrap()
}

/// Factor-form point `(1/D) sum_d fold(U_d V_d^T)` with rank-`k` pairs.
pub fn random_point(shape: Shape3, d: usize, k: usize, r: &mut ChaCha8Rng) -> FactorTensor {
    let terms = Mode::ALL
        .into_iter()
        .take(d)
        .map(|m| (1.0 / d as f64, Arc::new(random_pair(shape, m, k, r))))
        .collect();
    FactorTensor::new(shape, terms).unwrap()
}

/// Observations of a random CP-rank `rank` tensor on `nnz` entries.
pub fn low_rank_observations(
    shape: Shape3,
    rank: usize,
    nnz: usize,
    noise: f64,
    r: &mut ChaCha8Rng,
) -> SparseTensor3 {
    let [i1, i2, i3] = shape.dims();
    let comps: Vec<_> = (0..rank)
        .map(|_| {
            let a: Vec<f64> = (0..i1).map(|_| r.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..i2).map(|_| r.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..i3).map(|_| r.random_range(-1.0..1.0)).collect();
            (a, b, c)
        })
        .collect();
    let pattern = random_sparse(shape, nnz, r);
    let entries = pattern
        .indices()
        .iter()
        .map(|&[x, y, z]| {
            let v: f64 = comps.iter().map(|(a, b, c)| a[x] * b[y] * c[z]).sum();
            ([x, y, z], v + noise * r.random_range(-1.0..1.0))
        })
        .collect();
    SparseTensor3::from_entries(shape, entries).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// `0.5 (y - s)^2 + lambda kappa_index(y)`.
pub fn prox_objective(p: &Penalty, y: f64, s: f64, lambda: f64, index: usize) -> f64 {
    0.5 * (y - s) * (y - s) + lambda * p.kappa_at(y, index).unwrap()
}

/// The scalar prox minimum found on `n` evenly spaced points of `[0, hi]`.
pub fn grid_min(p: &Penalty, s: f64, lambda: f64, index: usize, hi: f64, n: usize) -> f64 {
    (0..n)
        .map(|i| prox_objective(p, hi * i as f64 / (n - 1) as f64, s, lambda, index))
        .fold(f64::INFINITY, f64::min)
}

/// Dense-SVD oracle for the matrix prox: full SVD, scalar prox per value.
pub fn prox_oracle(a: &DMatrix<f64>, p: &Penalty, lambda: f64) -> (DMatrix<f64>, Vec<f64>) {
    let svd = a.clone().svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut x = DMatrix::zeros(a.nrows(), a.ncols());
    let mut ys = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        let y = p
            .scalar_prox(svd.singular_values[i], lambda, rank + 1)
            .unwrap();
        ys.push(y);
        if y > 0.0 {
            x += u.column(i) * vt.row(i) * y;
        }
    }
    (x, ys)
}

pub fn penalties() -> Vec<Penalty> {
    vec![
        Penalty::Nuclear,
        Penalty::CappedL1 { theta: 1.5 },
        Penalty::Lsp { theta: 0.8 },
        Penalty::Tnn { keep: 2 },
    ]
}

/// A noiseless CP-rank `rank` tensor split into observed (`fraction`) and
/// held-out entries.
pub fn low_rank_split(
    shape: Shape3,
    rank: usize,
    fraction: f64,
    r: &mut ChaCha8Rng,
) -> (SparseTensor3, SparseTensor3) {
    let all = low_rank_observations(shape, rank, shape.numel(), 0.0, r);
    let n_obs = (fraction * shape.numel() as f64).round() as usize;
    let mut picks = vec![false; shape.numel()];
    for l in rand::seq::index::sample(r, shape.numel(), n_obs) {
        picks[l] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (idx, v) in all.iter() {
        if picks[shape.linear(idx)] {
            train.push((idx, v));
        } else {
            test.push((idx, v));
        }
    }
    (
        SparseTensor3::from_entries(shape, train).unwrap(),
        SparseTensor3::from_entries(shape, test).unwrap(),
    )
}
