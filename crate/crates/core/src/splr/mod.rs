//! The sparse-plus-low-rank operator.
//!
//! A proximal-average iterate `Z = sum_t c_t fold(U_t V_t^T) + c_s S` is
//! never materialized. Its mode unfoldings are exposed as [`ModeView`]s
//! whose products dispatch per term: same-mode factors multiply directly,
//! cross-mode factors go through the Kronecker kernels in [`kron`], and the
//! sparse term uses the precomputed unfolded coordinates of its pattern.

pub mod kron;
mod operator;

pub use kron::{kron_matvec, kron_matvec_into, kron_rmatvec, kron_rmatvec_into, Scratch};
pub use operator::{
    factor_inner, factor_norm, sparse_matvec, sparse_rmatvec, splr_matvec, splr_rmatvec, ModeView,
    SplrOperator,
};
