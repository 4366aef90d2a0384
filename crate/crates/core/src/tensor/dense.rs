use nalgebra::DMatrix;

use super::shape::{Mode, Shape3};
use crate::error::{NortError, Result};

/// Dense 3-order tensor stored in mode-1 unfolding column order:
/// element (i1, i2, i3) sits at `i1 + I1 * (i2 + I2 * i3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor3 {
    shape: Shape3,
    data: Vec<f64>,
}

impl DenseTensor3 {
    pub fn zeros(shape: Shape3) -> Self {
        DenseTensor3 {
            shape,
            data: vec![0.0; shape.numel()],
        }
    }

    pub fn from_vec(shape: Shape3, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(NortError::shape(format!(
                "{} values for a {} tensor",
                data.len(),
                shape
            )));
        }
        Ok(DenseTensor3 { shape, data })
    }

    pub fn from_fn(shape: Shape3, mut f: impl FnMut([usize; 3]) -> f64) -> Self {
        let data = (0..shape.numel())
            .map(|lin| f(shape.delinear(lin)))
            .collect();
        DenseTensor3 { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape3 {
        self.shape
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.data[self.shape.linear(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 3], v: f64) {
        let lin = self.shape.linear(idx);
        self.data[lin] = v;
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseTensor3) -> Result<()> {
        self.check_same(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    fn check_same(&self, other: &DenseTensor3) -> Result<()> {
        if self.shape != other.shape {
            return Err(NortError::shape(format!(
                "{} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    /// `I_d x (I_x / I_d)` unfolding. Mode 1 is a straight copy of the buffer.
    pub fn unfold(&self, mode: Mode) -> DMatrix<f64> {
        let rows = self.shape.dim(mode);
        let cols = self.shape.unfolded_cols(mode);
        if mode == Mode::First {
            return DMatrix::from_column_slice(rows, cols, &self.data);
        }
        let mut m = DMatrix::zeros(rows, cols);
        for (lin, &v) in self.data.iter().enumerate() {
            let (r, c) = self.shape.unfold_pos(mode, self.shape.delinear(lin));
            m[(r, c)] = v;
        }
        m
    }

    /// Inverse of [`DenseTensor3::unfold`].
    pub fn fold(m: &DMatrix<f64>, mode: Mode, shape: Shape3) -> Result<Self> {
        if m.nrows() != shape.dim(mode) || m.ncols() != shape.unfolded_cols(mode) {
            return Err(NortError::shape(format!(
                "{}x{} matrix cannot fold into mode {} of {}",
                m.nrows(),
                m.ncols(),
                mode,
                shape
            )));
        }
        if mode == Mode::First {
            return Ok(DenseTensor3 {
                shape,
                data: m.as_slice().to_vec(),
            });
        }
        let mut t = DenseTensor3::zeros(shape);
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                t.set(shape.fold_pos(mode, r, c), m[(r, c)]);
            }
        }
        Ok(t)
    }

    pub fn inner(&self, other: &DenseTensor3) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Free-function forms of the unfolding pair.
pub fn unfold_dense(t: &DenseTensor3, mode: Mode) -> DMatrix<f64> {
    t.unfold(mode)
}

pub fn fold_dense(m: &DMatrix<f64>, mode: Mode, shape: Shape3) -> Result<DenseTensor3> {
    DenseTensor3::fold(m, mode, shape)
}

pub fn inner(a: &DenseTensor3, b: &DenseTensor3) -> Result<f64> {
    a.inner(b)
}

pub fn fro_norm(a: &DenseTensor3) -> f64 {
    a.fro_norm()
}
