//! Concave singular-value penalties and their proximal maps.
//!
//! The capped-l1 penalty is `min(s, theta)` and the log-sum penalty is
//! `log(s / theta + 1)`. The truncated nuclear norm leaves the leading
//! `keep` singular values unpenalized and charges the rest linearly.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{NortError, Result};
use crate::svd::{power_svd, LinearOperator, SvdConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Penalty {
    /// `kappa(s) = s`, the convex nuclear norm.
    Nuclear,
    /// `kappa(s) = min(s, theta)`.
    CappedL1 { theta: f64 },
    /// `kappa(s) = log(s / theta + 1)`.
    Lsp { theta: f64 },
    /// Truncated nuclear norm: the first `keep` singular values are free.
    Tnn { keep: usize },
}

impl Penalty {
    /// Builds a penalty from its CLI name (`nn`, `capped-l1`, `lsp`, `tnn`).
    /// `theta` is the threshold, scale or truncation count depending on the kind.
    pub fn from_name(name: &str, theta: f64) -> Result<Penalty> {
        let p = match name {
            "nn" => Penalty::Nuclear,
            "capped-l1" => Penalty::CappedL1 { theta },
            "lsp" => Penalty::Lsp { theta },
            "tnn" => {
                if theta < 0.0 || theta.fract() != 0.0 {
                    return Err(NortError::config(format!(
                        "tnn needs a non-negative integer theta, got {theta}"
                    )));
                }
                Penalty::Tnn {
                    keep: theta as usize,
                }
            }
            other => {
                return Err(NortError::config(format!(
                    "unknown regularizer {other:?}, expected nn|capped-l1|lsp|tnn"
                )))
            }
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Penalty::CappedL1 { theta } | Penalty::Lsp { theta }
                if !(theta > 0.0) || !theta.is_finite() =>
            {
                Err(NortError::config(format!(
                    "theta must be positive, got {theta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Penalty::Nuclear => "nn",
            Penalty::CappedL1 { .. } => "capped-l1",
            Penalty::Lsp { .. } => "lsp",
            Penalty::Tnn { .. } => "tnn",
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            Penalty::Nuclear => 0.0,
            Penalty::CappedL1 { theta } | Penalty::Lsp { theta } => theta,
            Penalty::Tnn { keep } => keep as f64,
        }
    }

    pub fn is_convex(&self) -> bool {
        matches!(self, Penalty::Nuclear)
    }

    /// Lipschitz constant of `kappa` on `[0, inf)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Penalty::Lsp { theta } => 1.0 / theta,
            _ => 1.0,
        }
    }

    /// Penalty on the `index`-th (1-based) largest singular value `sigma`.
    /// Only the truncated nuclear norm depends on `index`.
    pub fn kappa_at(&self, sigma: f64, index: usize) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(NortError::Domain(format!(
                "kappa needs sigma >= 0, got {sigma}"
            )));
        }
        Ok(match *self {
            Penalty::Nuclear => sigma,
            Penalty::CappedL1 { theta } => sigma.min(theta),
            Penalty::Lsp { theta } => (sigma / theta).ln_1p(),
            Penalty::Tnn { keep } => {
                if index <= keep {
                    0.0
                } else {
                    sigma
                }
            }
        })
    }

    /// `kappa(sigma)` for index-free penalties; for TNN this is the tail value.
    pub fn kappa(&self, sigma: f64) -> Result<f64> {
        self.kappa_at(sigma, usize::MAX)
    }

    /// `phi(X) = sum_i kappa(sigma_i)` given sorted singular values.
    pub fn phi(&self, sigma: &[f64]) -> f64 {
        sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| self.kappa_at(s.max(0.0), i + 1).unwrap_or(0.0))
            .sum()
    }

    /// Global minimizer of `0.5 (y - sigma)^2 + lambda kappa_index(y)` over `y >= 0`.
    /// Ties go to the larger `y`.
    pub fn scalar_prox(&self, sigma: f64, lambda: f64, index: usize) -> Result<f64> {
        if !(sigma >= 0.0) || !(lambda >= 0.0) {
            return Err(NortError::Domain(format!(
                "scalar_prox needs sigma, lambda >= 0, got {sigma}, {lambda}"
            )));
        }
        Ok(self.prox_unchecked(sigma, lambda, index))
    }

    fn prox_unchecked(&self, sigma: f64, lambda: f64, index: usize) -> f64 {
        if lambda == 0.0 {
            return sigma;
        }
        match *self {
            Penalty::Nuclear => (sigma - lambda).max(0.0),
            Penalty::Tnn { keep } => {
                if index <= keep {
                    sigma
                } else {
                    (sigma - lambda).max(0.0)
                }
            }
            Penalty::CappedL1 { theta } => {
                // Below the cap the penalty is linear, above it constant.
                let lo = (sigma - lambda).clamp(0.0, theta);
                let hi = sigma.max(theta);
                let obj = |y: f64| 0.5 * (y - sigma).powi(2) + lambda * y.min(theta);
                pick_larger_on_tie(&[lo, hi], obj)
            }
            Penalty::Lsp { theta } => {
                // Stationary points solve y^2 + (theta - sigma) y + (lambda - sigma theta) = 0.
                let b = theta - sigma;
                let c = lambda - sigma * theta;
                let disc = b * b - 4.0 * c;
                let mut cands = [0.0; 3];
                let mut n = 1;
                if disc >= 0.0 {
                    let sq = disc.sqrt();
                    // Stable root pair.
                    let q = -0.5 * (b + b.signum() * sq);
                    let (r1, r2) = if q != 0.0 { (q, c / q) } else { (0.0, 0.0) };
                    for r in [r1, r2] {
                        if r > 0.0 {
                            cands[n] = r;
                            n += 1;
                        }
                    }
                }
                let obj = |y: f64| 0.5 * (y - sigma).powi(2) + lambda * (y / theta).ln_1p();
                pick_larger_on_tie(&cands[..n], obj)
            }
        }
    }
}

fn pick_larger_on_tie(cands: &[f64], obj: impl Fn(f64) -> f64) -> f64 {
    let mut best = cands[0];
    let mut best_obj = obj(best);
    for &y in &cands[1..] {
        let o = obj(y);
        if o < best_obj || (o == best_obj && y > best) {
            best = y;
            best_obj = o;
        }
    }
    best
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Penalty::Nuclear => write!(f, "nn"),
            Penalty::CappedL1 { theta } => write!(f, "capped-l1(theta={theta})"),
            Penalty::Lsp { theta } => write!(f, "lsp(theta={theta})"),
            Penalty::Tnn { keep } => write!(f, "tnn(keep={keep})"),
        }
    }
}

impl FromStr for Penalty {
    type Err = NortError;

    /// Parses `name` or `name:theta`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some((name, theta)) => {
                let theta = theta
                    .parse()
                    .map_err(|_| NortError::config(format!("bad theta in {s:?}")))?;
                Penalty::from_name(name, theta)
            }
            None => Penalty::from_name(s, 1.0),
        }
    }
}

/// Options for [`gsvt`].
#[derive(Debug, Clone, Copy)]
pub struct GsvtOptions<'a> {
    /// Initial number of singular triplets to compute.
    pub rank_hint: usize,
    /// Hard upper bound on the returned rank.
    pub max_rank: Option<usize>,
    pub svd: SvdConfig,
    pub warm_start: Option<&'a DMatrix<f64>>,
}

impl Default for GsvtOptions<'_> {
    fn default() -> Self {
        GsvtOptions {
            rank_hint: 5,
            max_rank: None,
            svd: SvdConfig::default(),
            warm_start: None,
        }
    }
}

/// Result of a proximal step. The thresholded values are folded into `u`,
/// so the prox point is `u v^T`.
#[derive(Debug, Clone)]
pub struct ProxResult {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Thresholded singular values, all positive.
    pub y: Vec<f64>,
    /// Singular values of the input that were computed.
    pub sigma: Vec<f64>,
    /// Orthonormal left block from the final SVD, for warm starting the next call.
    pub basis: DMatrix<f64>,
    pub svd_iters: usize,
    pub svd_residual: f64,
}

impl ProxResult {
    pub fn rank(&self) -> usize {
        self.y.len()
    }
}

/// Generalized singular value thresholding: `argmin_X 0.5 ||X - A||_F^2 + lambda phi(X)`.
///
/// The SVD is grown (doubling the rank) until the smallest computed
/// triplet thresholds to zero, the operator's full rank is reached, or
/// `max_rank` is hit.
pub fn gsvt<A: LinearOperator + ?Sized>(
    op: &A,
    penalty: &Penalty,
    lambda: f64,
    opts: &GsvtOptions<'_>,
) -> Result<ProxResult> {
    if !(lambda >= 0.0) {
        return Err(NortError::Domain(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    penalty.validate()?;
    let min_dim = op.nrows().min(op.ncols());
    if min_dim == 0 {
        return Err(NortError::shape("operator with an empty dimension"));
    }
    let cap = opts.max_rank.unwrap_or(min_dim).clamp(1, min_dim);
    let mut k = opts.rank_hint.clamp(1, cap);
    let mut warm = opts.warm_start.cloned();
    loop {
        let svd = solve_svd(op, k, &opts.svd, warm.as_ref())?;
        let y: Vec<f64> = svd
            .sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| penalty.prox_unchecked(s.max(0.0), lambda, i + 1))
            .collect();
        let tail_open = y.last().is_some_and(|&v| v > 0.0);
        if tail_open && k < cap {
            k = (2 * k).min(cap);
            warm = Some(svd.basis);
            continue;
        }
        let r = y.iter().take_while(|&&v| v > 0.0).count();
        let mut u = svd.u.columns(0, r).into_owned();
        for (j, &yj) in y[..r].iter().enumerate() {
            u.column_mut(j).scale_mut(yj);
        }
        return Ok(ProxResult {
            u,
            v: svd.v.columns(0, r).into_owned(),
            y: y[..r].to_vec(),
            sigma: svd.sigma,
            basis: svd.basis,
            svd_iters: svd.iters_used,
            svd_residual: svd.residual,
        });
    }
}

/// Power SVD with restarts; fails if the tolerance is never met.
fn solve_svd<A: LinearOperator + ?Sized>(
    op: &A,
    k: usize,
    cfg: &SvdConfig,
    warm: Option<&DMatrix<f64>>,
) -> Result<crate::svd::TruncatedSvd> {
    let mut cfg = *cfg;
    let mut svd = power_svd(op, k, &cfg, warm)?;
    for _ in 0..cfg.max_restarts {
        if svd.converged {
            break;
        }
        cfg.max_power_iters *= 2;
        cfg.seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let basis = svd.basis.clone();
        svd = power_svd(op, k, &cfg, Some(&basis))?;
    }
    if !svd.converged {
        return Err(NortError::Numerical {
            message: format!(
                "power SVD of rank {k} stalled at relative residual {:.3e} (tol {:.1e})",
                svd.residual, cfg.tol
            ),
            residual: svd.residual,
        });
    }
    Ok(svd)
}

/// Singular value thresholding, the nuclear-norm prox.
pub fn svt<A: LinearOperator + ?Sized>(
    op: &A,
    lambda: f64,
    opts: &GsvtOptions<'_>,
) -> Result<ProxResult> {
    gsvt(op, &Penalty::Nuclear, lambda, opts)
}

/// Dense reference prox: full SVD, then the scalar prox on every singular value.
pub fn gsvt_dense(a: &DMatrix<f64>, penalty: &Penalty, lambda: f64) -> Result<ProxResult> {
    if !(lambda >= 0.0) {
        return Err(NortError::Domain(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    let (u, sigma, v) = crate::svd::dense_svd(a);
    let y: Vec<f64> = sigma
        .iter()
        .enumerate()
        .map(|(i, &s)| penalty.prox_unchecked(s.max(0.0), lambda, i + 1))
        .collect();
    let r = y.iter().take_while(|&&v| v > 0.0).count();
    let mut us = u.columns(0, r).into_owned();
    for (j, &yj) in y[..r].iter().enumerate() {
        us.column_mut(j).scale_mut(yj);
    }
    Ok(ProxResult {
        u: us,
        v: v.columns(0, r).into_owned(),
        y: y[..r].to_vec(),
        sigma,
        basis: u,
        svd_iters: 0,
        svd_residual: 0.0,
    })
}
