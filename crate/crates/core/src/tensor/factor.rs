use std::sync::Arc;

use nalgebra::DMatrix;

use super::dense::DenseTensor3;
use super::shape::{Mode, Shape3};
use super::sparse::SparseTensor3;
use crate::error::{NortError, Result};

/// Low-rank factorization `U V^T` of one mode unfolding. The tensor it
/// stands for is the fold of that product along `mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    mode: Mode,
    shape: Shape3,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
}

impl FactorPair {
    pub fn new(mode: Mode, shape: Shape3, u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        if u.nrows() != shape.dim(mode) || v.nrows() != shape.unfolded_cols(mode) {
            return Err(NortError::shape(format!(
                "factors {}x{} / {}x{} do not fit mode {} of {}",
                u.nrows(),
                u.ncols(),
                v.nrows(),
                v.ncols(),
                mode,
                shape
            )));
        }
        if u.ncols() != v.ncols() {
            return Err(NortError::shape(format!(
                "rank mismatch: U has {} columns, V has {}",
                u.ncols(),
                v.ncols()
            )));
        }
        Ok(FactorPair { mode, shape, u, v })
    }

    pub fn zero(mode: Mode, shape: Shape3) -> Self {
        FactorPair {
            mode,
            shape,
            u: DMatrix::zeros(shape.dim(mode), 0),
            v: DMatrix::zeros(shape.unfolded_cols(mode), 0),
        }
    }

    #[inline]
    pub fn mode(&self) -> Mode {
        self.mode
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    #[inline]
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Value of the folded tensor at a 0-based index triple.
    #[inline]
    pub fn value_at(&self, idx: [usize; 3]) -> f64 {
        let (r, c) = self.shape.unfold_pos(self.mode, idx);
        self.value_at_unfolded(r, c)
    }

    #[inline]
    fn value_at_unfolded(&self, row: usize, col: usize) -> f64 {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let (us, vs) = (self.u.as_slice(), self.v.as_slice());
        (0..self.rank())
            .map(|p| us[row + p * m] * vs[col + p * n])
            .sum()
    }

    /// Dense unfolded matrix `U V^T`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        DenseTensor3::fold(&self.to_matrix(), self.mode, self.shape)
            .expect("factor dimensions validated at construction")
    }

    /// Number of stored reals, `k (I_mode + I_x / I_mode)`.
    pub fn storage_len(&self) -> usize {
        self.u.len() + self.v.len()
    }
}

/// A tensor held as a weighted sum of folded factor pairs.
#[derive(Debug, Clone)]
pub struct FactorTensor {
    shape: Shape3,
    terms: Vec<(f64, Arc<FactorPair>)>,
}

impl FactorTensor {
    pub fn zeros(shape: Shape3) -> Self {
        FactorTensor {
            shape,
            terms: Vec::new(),
        }
    }

    pub fn new(shape: Shape3, terms: Vec<(f64, Arc<FactorPair>)>) -> Result<Self> {
        let mut t = FactorTensor::zeros(shape);
        for (c, f) in terms {
            t.push(c, f)?;
        }
        Ok(t)
    }

    /// Adds `coeff * fold(f)`. Zero coefficients and rank-0 pairs are dropped.
    pub fn push(&mut self, coeff: f64, f: Arc<FactorPair>) -> Result<()> {
        if f.shape() != self.shape {
            return Err(NortError::shape(format!(
                "factor for {} added to {} tensor",
                f.shape(),
                self.shape
            )));
        }
        if !coeff.is_finite() {
            return Err(NortError::Domain(format!(
                "coefficient {coeff} is not finite"
            )));
        }
        if coeff != 0.0 && f.rank() > 0 {
            self.terms.push((coeff, f));
        }
        Ok(())
    }

    /// Concatenates the terms of `other`, each scaled by `alpha`.
    pub fn extend_scaled(&mut self, alpha: f64, other: &FactorTensor) -> Result<()> {
        for (c, f) in &other.terms {
            self.push(alpha * c, f.clone())?;
        }
        Ok(())
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    #[inline]
    pub fn terms(&self) -> &[(f64, Arc<FactorPair>)] {
        &self.terms
    }

    #[inline]
    pub fn value_at(&self, idx: [usize; 3]) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value_at(idx)).sum()
    }

    /// Values at every index of `pattern`, using its precomputed unfolded
    /// positions. Costs O(nnz * sum of ranks).
    pub fn values_on(&self, pattern: &super::sparse::SparsePattern) -> Result<Vec<f64>> {
        if pattern.shape() != self.shape {
            return Err(NortError::shape(format!(
                "pattern {} vs tensor {}",
                pattern.shape(),
                self.shape
            )));
        }
        let mut out = vec![0.0; pattern.len()];
        for (c, f) in &self.terms {
            let rows = pattern.rows(f.mode());
            let cols = pattern.cols(f.mode());
            for (o, (&r, &col)) in out.iter_mut().zip(rows.iter().zip(cols)) {
                *o += c * f.value_at_unfolded(r, col);
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros(self.shape);
        for (c, f) in &self.terms {
            t.axpy(*c, &f.to_dense()).expect("shapes checked on push");
        }
        t
    }

    pub fn storage_len(&self) -> usize {
        self.terms.iter().map(|(_, f)| f.storage_len()).sum()
    }
}

/// `P_Omega(X - O)` for a factor-form `X`, evaluated only on the pattern of
/// `obs`. Each entry touches one row of every `U` and `V`.
pub fn sparse_residual(x: &FactorTensor, obs: &SparseTensor3) -> Result<SparseTensor3> {
    let mut values = x.values_on(obs.pattern())?;
    for (v, o) in values.iter_mut().zip(obs.values()) {
        *v -= o;
    }
    SparseTensor3::with_pattern(obs.pattern().clone(), values)
}
