use std::sync::Arc;

use super::dense::DenseTensor3;
use super::shape::{Mode, Shape3};
use crate::error::{NortError, Result};

/// Index set of a sparse tensor: sorted by canonical linear index, with the
/// (row, col) position of every entry precomputed for each mode unfolding.
#[derive(Debug, PartialEq)]
pub struct SparsePattern {
    shape: Shape3,
    indices: Vec<[usize; 3]>,
    rows: [Vec<usize>; 3],
    cols: [Vec<usize>; 3],
}

impl SparsePattern {
    /// Builds a pattern from indices already in canonical order with no duplicates.
    fn from_sorted(shape: Shape3, indices: Vec<[usize; 3]>) -> Self {
        let mut rows: [Vec<usize>; 3] = Default::default();
        let mut cols: [Vec<usize>; 3] = Default::default();
        for mode in Mode::ALL {
            let (r, c): (Vec<_>, Vec<_>) = indices
                .iter()
                .map(|&idx| shape.unfold_pos(mode, idx))
                .unzip();
            rows[mode.index()] = r;
            cols[mode.index()] = c;
        }
        SparsePattern {
            shape,
            indices,
            rows,
            cols,
        }
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn indices(&self) -> &[[usize; 3]] {
        &self.indices
    }

    #[inline]
    pub fn rows(&self, mode: Mode) -> &[usize] {
        &self.rows[mode.index()]
    }

    #[inline]
    pub fn cols(&self, mode: Mode) -> &[usize] {
        &self.cols[mode.index()]
    }

    /// Bytes held by the index arrays.
    pub fn storage_bytes(&self) -> usize {
        self.len() * std::mem::size_of::<usize>() * 9
    }
}

/// Sparse 3-order tensor in coordinate form. The index pattern is shared,
/// so tensors that live on the same observation set are cheap to derive.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor3 {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SparseTensor3 {
    /// Builds from 0-based `(index, value)` pairs in any order. Duplicate
    /// triples and out-of-range indices are rejected.
    pub fn from_entries(shape: Shape3, mut entries: Vec<([usize; 3], f64)>) -> Result<Self> {
        for (idx, _) in &entries {
            shape.check_index(*idx)?;
        }
        entries.sort_unstable_by_key(|(idx, _)| shape.linear(*idx));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            let i = w[0].0;
            return Err(NortError::Domain(format!(
                "duplicate entry ({}, {}, {})",
                i[0] + 1,
                i[1] + 1,
                i[2] + 1
            )));
        }
        let (indices, values) = entries.into_iter().unzip();
        Ok(SparseTensor3 {
            pattern: Arc::new(SparsePattern::from_sorted(shape, indices)),
            values,
        })
    }

    pub fn empty(shape: Shape3) -> Self {
        SparseTensor3 {
            pattern: Arc::new(SparsePattern::from_sorted(shape, Vec::new())),
            values: Vec::new(),
        }
    }

    /// A tensor on an existing pattern.
    pub fn with_pattern(pattern: Arc<SparsePattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.len() {
            return Err(NortError::shape(format!(
                "{} values for a pattern of {} entries",
                values.len(),
                pattern.len()
            )));
        }
        Ok(SparseTensor3 { pattern, values })
    }

    /// Samples `dense` on this tensor's pattern.
    pub fn gather(pattern: Arc<SparsePattern>, dense: &DenseTensor3) -> Result<Self> {
        if pattern.shape() != dense.shape() {
            return Err(NortError::shape(format!(
                "pattern {} vs tensor {}",
                pattern.shape(),
                dense.shape()
            )));
        }
        let values = pattern.indices().iter().map(|&i| dense.get(i)).collect();
        Ok(SparseTensor3 { pattern, values })
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.pattern.shape()
    }

    #[inline]
    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    /// Number of stored entries, the l1 size of the observation mask.
    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn indices(&self) -> &[[usize; 3]] {
        self.pattern.indices()
    }

    pub fn iter(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        self.indices()
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn same_pattern(&self, other: &SparseTensor3) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern
    }

    pub fn to_dense(&self) -> DenseTensor3 {
        let mut t = DenseTensor3::zeros(self.shape());
        for (idx, v) in self.iter() {
            t.set(idx, v);
        }
        t
    }

    pub fn fro_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn storage_bytes(&self) -> usize {
        self.pattern.storage_bytes() + self.values.len() * std::mem::size_of::<f64>()
    }
}
