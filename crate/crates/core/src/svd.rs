//! Truncated SVD of an abstract operator by block power (subspace) iteration.
//!
//! Each sweep multiplies a block of `k + oversampling` vectors by the
//! operator and its adjoint, then extracts Ritz triplets from the small
//! projected matrix. Only `matvec` and `rmatvec` touch the operator.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NortError, Result};

/// A real matrix known only through its products.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`.
    fn matvec(&self, x: &[f64], y: &mut [f64]);
    /// `y = A^T x`.
    fn rmatvec(&self, x: &[f64], y: &mut [f64]);

    /// `A X`, column by column.
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        apply_columns(self, x, false)
    }

    /// `A^T X`, column by column.
    fn apply_adjoint(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        apply_columns(self, x, true)
    }
}

fn apply_columns<A: LinearOperator + ?Sized>(
    op: &A,
    x: &DMatrix<f64>,
    adjoint: bool,
) -> DMatrix<f64> {
    let (in_len, out_len) = if adjoint {
        (op.nrows(), op.ncols())
    } else {
        (op.ncols(), op.nrows())
    };
    assert_eq!(
        x.nrows(),
        in_len,
        "block operand has the wrong number of rows"
    );
    let mut out = DMatrix::zeros(out_len, x.ncols());
    for (xs, ys) in x
        .as_slice()
        .chunks_exact(in_len.max(1))
        .zip(out.as_mut_slice().chunks_exact_mut(out_len.max(1)))
    {
        if adjoint {
            op.rmatvec(xs, ys);
        } else {
            op.matvec(xs, ys);
        }
    }
    out
}

/// A dense matrix as an operator.
#[derive(Debug, Clone)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }

    fn ncols(&self) -> usize {
        self.0.ncols()
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (m, n) = self.0.shape();
        y.fill(0.0);
        for (c, &xc) in x.iter().enumerate().take(n) {
            if xc != 0.0 {
                for (yi, a) in y.iter_mut().zip(&self.0.as_slice()[c * m..(c + 1) * m]) {
                    *yi += a * xc;
                }
            }
        }
    }

    fn rmatvec(&self, x: &[f64], y: &mut [f64]) {
        let m = self.0.nrows();
        for (c, yc) in y.iter_mut().enumerate() {
            *yc = self.0.as_slice()[c * m..(c + 1) * m]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.0 * x
    }

    fn apply_adjoint(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.0.tr_mul(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvdConfig {
    /// Sweeps allowed before giving up on one call.
    pub max_power_iters: usize,
    /// Target residual `||A v_i - s_i u_i|| <= tol * s_1` for every returned triplet.
    pub tol: f64,
    /// Retries with a doubled sweep budget, used by callers that require convergence.
    pub max_restarts: usize,
    pub seed: u64,
    pub oversampling: usize,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            max_power_iters: 100,
            tol: 1e-4,
            max_restarts: 2,
            seed: 0x5eed,
            oversampling: 5,
        }
    }
}

impl SvdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(NortError::config(format!(
                "svd tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_power_iters == 0 {
            return Err(NortError::config("svd max_power_iters must be at least 1"));
        }
        Ok(())
    }
}

/// Leading singular triplets. `u` is `nrows x k`, `v` is `ncols x k`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
    pub converged: bool,
    pub iters_used: usize,
    /// Largest `||A v_i - s_i u_i|| / s_1` over the returned triplets.
    pub residual: f64,
    /// The full orthonormal left block of the last sweep, `k + oversampling` columns.
    /// Useful as a warm start for a nearby operator.
    pub basis: DMatrix<f64>,
}

/// Thin SVD with singular values sorted in nonincreasing order.
pub fn dense_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return (DMatrix::zeros(m, 0), Vec::new(), DMatrix::zeros(n, 0));
    }
    // Reduce very rectangular inputs to a square core first.
    if m >= 2 * n {
        let qr = a.clone().qr();
        let (u, s, v) = dense_svd(&qr.r());
        return (qr.q() * u, s, v);
    }
    if n >= 2 * m {
        let (v, s, u) = dense_svd(&a.transpose());
        return (u, s, v);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_fn(m, r, |row, c| u[(row, order[c])]);
    let v_sorted = DMatrix::from_fn(n, r, |row, c| vt[(order[c], row)]);
    (u_sorted, sigma, v_sorted)
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Top-`k` singular triplets of `op`.
///
/// `warm_start`, if given, seeds the left subspace (its columns need not be
/// orthonormal). Returns `converged = false` with the best iterate when the
/// sweep budget runs out.
pub fn power_svd<A: LinearOperator + ?Sized>(
    op: &A,
    k: usize,
    cfg: &SvdConfig,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<TruncatedSvd> {
    cfg.validate()?;
    let (m, n) = (op.nrows(), op.ncols());
    let min_dim = m.min(n);
    if k == 0 || k > min_dim {
        return Err(NortError::Domain(format!(
            "requested rank {k} outside 1..={min_dim}"
        )));
    }
    let l = (k + cfg.oversampling).min(min_dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut q = match warm_start {
        Some(w) if w.nrows() == m && w.ncols() > 0 => {
            let keep = w.ncols().min(l);
            let mut block = gaussian(m, l, &mut rng);
            block.columns_mut(0, keep).copy_from(&w.columns(0, keep));
            orthonormalize(block)
        }
        _ => orthonormalize(op.apply(&gaussian(n, l, &mut rng))),
    };

    let mut best: Option<TruncatedSvd> = None;
    for iter in 1..=cfg.max_power_iters {
        // Rayleigh-Ritz on span(q): B = Q^T A, computed as B^T = A^T Q.
        let bt = op.apply_adjoint(&q);
        let (p, s, w) = dense_svd(&bt);
        // B = W S P^T, so u = Q W, v = P.
        let u_all = &q * &w;
        let av = op.apply(&p);
        let s1 = s.first().copied().unwrap_or(0.0);
        let mut residual = 0.0f64;
        if s1 > 0.0 {
            for (i, &si) in s.iter().enumerate().take(k) {
                let r = (av.column(i) - u_all.column(i) * si).norm() / s1;
                residual = residual.max(r);
            }
        }
        let converged = residual <= cfg.tol || s1 == 0.0;
        let out = TruncatedSvd {
            u: u_all.columns(0, k).into_owned(),
            sigma: s[..k].to_vec(),
            v: p.columns(0, k).into_owned(),
            converged,
            iters_used: iter,
            residual,
            basis: u_all,
        };
        if converged {
            return Ok(out);
        }
        if best.as_ref().is_none_or(|b| out.residual < b.residual) {
            best = Some(out);
        }
        q = orthonormalize(av);
    }
    Ok(best.expect("at least one sweep ran"))
}

/// All singular values of an operator from the Gram matrix of its short
/// side, in nonincreasing order. Costs `2 min(m, n)` products and
/// `min(m, n)^2` storage. Values below about `sqrt(eps) sigma_1` are only
/// accurate in absolute terms.
pub fn gram_singular_values<A: LinearOperator + ?Sized>(op: &A) -> Vec<f64> {
    let (m, n) = (op.nrows(), op.ncols());
    let short = m.min(n);
    let mut gram = DMatrix::zeros(short, short);
    let mut unit = vec![0.0; short];
    let mut long = vec![0.0; m.max(n)];
    for i in 0..short {
        unit[i] = 1.0;
        long.iter_mut().for_each(|v| *v = 0.0);
        let out = &mut gram.as_mut_slice()[i * short..(i + 1) * short];
        if m <= n {
            op.rmatvec(&unit, &mut long);
            op.matvec(&long, out);
        } else {
            op.matvec(&unit, &mut long);
            op.rmatvec(&long, out);
        }
        unit[i] = 0.0;
    }
    let sym = (&gram + gram.transpose()) * 0.5;
    let mut s: Vec<f64> = sym
        .symmetric_eigenvalues()
        .iter()
        .map(|&e| e.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}
