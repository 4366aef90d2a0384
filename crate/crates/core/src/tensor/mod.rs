//! 3-order tensor containers and unfolding index arithmetic.
//!
//! Indices are 0-based throughout the API. File formats and error messages
//! use 1-based indices.

mod dense;
mod factor;
pub mod io;
mod shape;
mod sparse;

pub use dense::{fold_dense, fro_norm, inner, unfold_dense, DenseTensor3};
pub use factor::{sparse_residual, FactorPair, FactorTensor};
pub use shape::{unfold_index, Mode, Shape3};
pub use sparse::{SparsePattern, SparseTensor3};
