use serde::{Deserialize, Serialize};

use crate::error::{NortError, Result};
use crate::penalty::Penalty;
use crate::splr::SplrOperator;
use crate::svd::{dense_svd, gram_singular_values, power_svd, LinearOperator, SvdConfig};
use crate::tensor::{DenseTensor3, FactorTensor, Mode, Shape3, SparseTensor3};

/// How the penalty part of `F` is evaluated for factor-form points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FEval {
    /// Power SVD of each mode view at the operator's rank bound, or the Gram
    /// spectrum when the bound is at least half the short side. Exact up to
    /// the SVD tolerance because the bound is a true upper bound on the rank.
    Factored,
    /// Densify and take a full SVD of each unfolding. For small tensors only.
    Dense,
}

/// `F(X) = 0.5 ||P_Omega(X - O)||_F^2 + sum_d (lambda_d / D) phi(X_<d>)`.
///
/// The first `D = lambda.len()` modes are regularized.
#[derive(Debug, Clone)]
pub struct Objective {
    pub obs: SparseTensor3,
    pub lambda: Vec<f64>,
    pub penalty: Penalty,
    /// Smoothness constant of the loss; 1 for the square loss.
    pub rho: f64,
}

impl Objective {
    pub fn new(obs: SparseTensor3, lambda: Vec<f64>, penalty: Penalty) -> Result<Self> {
        if lambda.is_empty() || lambda.len() > 3 {
            return Err(NortError::config(format!(
                "D must be 1, 2 or 3, got {}",
                lambda.len()
            )));
        }
        if let Some(l) = lambda.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(NortError::config(format!(
                "lambda must be positive and finite, got {l}"
            )));
        }
        penalty.validate()?;
        Ok(Objective {
            obs,
            lambda,
            penalty,
            rho: 1.0,
        })
    }

    /// Same `lambda` on the first `d` modes.
    pub fn uniform(obs: SparseTensor3, lambda: f64, d: usize, penalty: Penalty) -> Result<Self> {
        Objective::new(obs, vec![lambda; d], penalty)
    }

    pub fn shape(&self) -> Shape3 {
        self.obs.shape()
    }

    /// Number of regularized modes.
    pub fn d(&self) -> usize {
        self.lambda.len()
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        Mode::ALL.into_iter().take(self.d())
    }

    /// Lipschitz constant of the penalty's `kappa`.
    pub fn lipschitz(&self) -> f64 {
        self.penalty.lipschitz()
    }

    /// `rho + D L`; the step parameter must exceed this.
    pub fn tau_floor(&self) -> f64 {
        self.rho + self.d() as f64 * self.lipschitz()
    }

    /// `0.5 ||r||^2` for a residual on the observed pattern.
    pub fn loss(residual: &SparseTensor3) -> f64 {
        0.5 * residual.values().iter().map(|v| v * v).sum::<f64>()
    }

    /// `sum_d (lambda_d / D) phi(.)` given each regularized mode's singular values.
    pub fn penalty_from_spectra(&self, spectra: &[Vec<f64>]) -> f64 {
        let d = self.d() as f64;
        self.lambda
            .iter()
            .zip(spectra)
            .map(|(l, s)| l / d * self.penalty.phi(s))
            .sum()
    }

    /// `F` at a factor-form point.
    pub fn evaluate(&self, x: &FactorTensor, how: FEval, svd: &SvdConfig) -> Result<f64> {
        if x.shape() != self.shape() {
            return Err(NortError::shape(format!(
                "{} vs {}",
                x.shape(),
                self.shape()
            )));
        }
        let residual = crate::tensor::sparse_residual(x, &self.obs)?;
        self.evaluate_with_residual(x, &residual, how, svd)
    }

    /// `F` when `P_Omega(X - O)` is already known.
    pub fn evaluate_with_residual(
        &self,
        x: &FactorTensor,
        residual: &SparseTensor3,
        how: FEval,
        svd: &SvdConfig,
    ) -> Result<f64> {
        let spectra = match how {
            FEval::Dense => {
                let dense = x.to_dense();
                self.modes()
                    .map(|m| dense_svd(&dense.unfold(m)).1)
                    .collect()
            }
            FEval::Factored => {
                let op = SplrOperator::new(x.clone(), None)?;
                let mut out = Vec::with_capacity(self.d());
                for m in self.modes() {
                    let k = op.low_rank_rank_bound(m);
                    if k == 0 {
                        out.push(Vec::new());
                        continue;
                    }
                    let view = op.view(m);
                    let short = view.nrows().min(view.ncols());
                    if 2 * k >= short {
                        // Near full rank: the Gram spectrum is exact and cheaper
                        // than a full-width power sweep.
                        out.push(gram_singular_values(&view));
                        continue;
                    }
                    let t = power_svd(&view, k, svd, None)?;
                    if !t.converged {
                        return Err(NortError::Numerical {
                            message: format!("objective SVD on mode {m} did not converge"),
                            residual: t.residual,
                        });
                    }
                    out.push(t.sigma);
                }
                out
            }
        };
        Ok(Objective::loss(residual) + self.penalty_from_spectra(&spectra))
    }

    /// `F` at a dense point, using full SVDs.
    pub fn evaluate_dense(&self, x: &DenseTensor3) -> Result<f64> {
        if x.shape() != self.shape() {
            return Err(NortError::shape(format!(
                "{} vs {}",
                x.shape(),
                self.shape()
            )));
        }
        let loss: f64 = self
            .obs
            .iter()
            .map(|(idx, o)| {
                let r = x.get(idx) - o;
                0.5 * r * r
            })
            .sum();
        let spectra: Vec<Vec<f64>> = self.modes().map(|m| dense_svd(&x.unfold(m)).1).collect();
        Ok(loss + self.penalty_from_spectra(&spectra))
    }
}
