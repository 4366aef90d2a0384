//! Low-rank tensor completion with nonconvex overlapped nuclear-norm
//! regularization, solved by proximal-average iterations that keep every
//! iterate in sparse-plus-low-rank factored form.

// Negated float comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod penalty;
pub mod solver;
pub mod splr;
pub mod svd;
pub mod tensor;

pub use error::{NortError, Result};
pub use penalty::{gsvt, gsvt_dense, svt, GsvtOptions, Penalty, ProxResult};
pub use solver::{
    gdpan_solve, matrix_complete, nort_solve, pa_apg_solve, snort_solve, Estimate, FEval,
    Objective, Solution, SolverConfig, StopReason, TraceRecord,
};
pub use splr::{ModeView, SplrOperator};
pub use svd::{
    dense_svd, gram_singular_values, power_svd, DenseOperator, LinearOperator, SvdConfig,
    TruncatedSvd,
};
pub use tensor::*;
