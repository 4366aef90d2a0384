use crate::error::{NortError, Result};
use crate::solver::Estimate;
use crate::tensor::{sparse_residual, DenseTensor3, FactorTensor, SparseTensor3};

fn finish(sq: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(NortError::Domain("RMSE over an empty index set".into()));
    }
    Ok((sq / n as f64).sqrt())
}

/// `||P_S(X - R)||_F / |S|^{1/2}` for a factor-form `X` and reference values on `S`.
pub fn rmse_factored(x: &FactorTensor, reference: &SparseTensor3) -> Result<f64> {
    if reference.nnz() == 0 {
        return finish(0.0, 0);
    }
    let r = sparse_residual(x, reference)?;
    finish(r.values().iter().map(|v| v * v).sum(), r.nnz())
}

/// RMSE of a dense estimate on the pattern of `reference`.
pub fn rmse_dense(x: &DenseTensor3, reference: &SparseTensor3) -> Result<f64> {
    if x.shape() != reference.shape() {
        return Err(NortError::shape(format!(
            "{} vs {}",
            x.shape(),
            reference.shape()
        )));
    }
    let sq = reference
        .iter()
        .map(|(idx, v)| (x.get(idx) - v).powi(2))
        .sum();
    finish(sq, reference.nnz())
}

/// RMSE of either kind of estimate.
pub fn rmse(x: &Estimate, reference: &SparseTensor3) -> Result<f64> {
    match x {
        Estimate::Factored(f) => rmse_factored(f, reference),
        Estimate::Dense(d) => rmse_dense(d, reference),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{FactorPair, Mode, Shape3};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn exact_match_is_zero() {
        let s = Shape3::new(3, 3, 2).unwrap();
        let x = DenseTensor3::from_fn(s, |[i, j, k]| (i + 2 * j + 3 * k) as f64);
        let idx = [[0, 1, 1], [2, 2, 0]];
        let r =
            SparseTensor3::from_entries(s, idx.iter().map(|&i| (i, x.get(i))).collect()).unwrap();
        assert_eq!(rmse_dense(&x, &r).unwrap(), 0.0);
    }

    #[test]
    fn single_entry_arithmetic() {
        let s = Shape3::new(2, 2, 2).unwrap();
        let r = SparseTensor3::from_entries(s, vec![([1, 0, 1], 2.0)]).unwrap();
        assert_eq!(rmse_factored(&FactorTensor::zeros(s), &r).unwrap(), 2.0);
        assert_eq!(rmse_dense(&DenseTensor3::zeros(s), &r).unwrap(), 2.0);
    }

    #[test]
    fn empty_set_is_domain_error() {
        let s = Shape3::new(2, 2, 2).unwrap();
        let r = SparseTensor3::empty(s);
        assert!(matches!(
            rmse_factored(&FactorTensor::zeros(s), &r),
            Err(NortError::Domain(_))
        ));
        assert!(matches!(
            rmse_dense(&DenseTensor3::zeros(s), &r),
            Err(NortError::Domain(_))
        ));
    }

    #[test]
    fn factored_matches_densified() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = Shape3::new(7, 6, 5).unwrap();
        let mut x = FactorTensor::zeros(s);
        for m in Mode::ALL {
            let u = DMatrix::from_fn(s.dim(m), 2, |_, _| rng.random_range(-1.0..1.0));
            let v = DMatrix::from_fn(s.unfolded_cols(m), 2, |_, _| rng.random_range(-1.0..1.0));
            x.push(1.0 / 3.0, Arc::new(FactorPair::new(m, s, u, v).unwrap()))
                .unwrap();
        }
        let entries = rand::seq::index::sample(&mut rng, s.numel(), 50)
            .iter()
            .map(|l| (s.delinear(l), rng.random_range(-1.0..1.0)))
            .collect();
        let r = SparseTensor3::from_entries(s, entries).unwrap();
        let a = rmse_factored(&x, &r).unwrap();
        let b = rmse_dense(&x.to_dense(), &r).unwrap();
        assert!((a - b).abs() <= 1e-12 * b);
    }
}
