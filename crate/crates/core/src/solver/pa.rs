use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::{Estimate, Objective, Solution, SolverConfig, StopReason, TraceRecord};
use crate::data::rmse_factored;
use crate::error::{NortError, Result};
use crate::penalty::{gsvt, GsvtOptions, Penalty};
use crate::splr::{factor_norm, SplrOperator};
use crate::tensor::{sparse_residual, FactorPair, FactorTensor, Mode, SparseTensor3};

/// Extrapolation policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Momentum {
    /// Plain proximal average: `V_t = X_t`.
    None,
    /// Accept `X_t + gamma (X_t - X_{t-1})` when it does not increase `F`;
    /// grow `gamma` by `1/p` (capped at 1) on accept, shrink by `p` on reject.
    Adaptive { gamma1: f64, p: f64 },
    /// Classical accelerated extrapolation with `theta_{t+1} = (1 + sqrt(1 + 4 theta_t^2)) / 2`.
    Nesterov,
}

struct ProxOut {
    pair: Arc<FactorPair>,
    basis: DMatrix<f64>,
}

/// Stepwise proximal-average solver on factor-form iterates.
#[derive(Clone)]
pub struct PaSolver<'a> {
    obj: &'a Objective,
    cfg: SolverConfig,
    momentum: Momentum,
    tau: f64,
    validation: Option<&'a SparseTensor3>,
    /// Pairs of `X_t` and `X_{t-1}`, one per regularized mode.
    y_cur: Vec<Arc<FactorPair>>,
    y_prev: Vec<Arc<FactorPair>>,
    bases: Vec<Option<DMatrix<f64>>>,
    gamma: f64,
    nesterov_theta: f64,
    /// `F(X_t)` and `P_Omega(X_t - O)` when known.
    f_cur: Option<f64>,
    res_cur: Option<SparseTensor3>,
    t: usize,
    trace: Vec<TraceRecord>,
    started: Instant,
    stop: Option<StopReason>,
    peak_storage_bytes: usize,
}

impl<'a> PaSolver<'a> {
    pub fn new(obj: &'a Objective, cfg: SolverConfig, momentum: Momentum) -> Result<Self> {
        cfg.validate()?;
        let tau = cfg.resolve_tau(obj)?;
        if obj.obs.nnz() == 0 {
            return Err(NortError::config("no observed entries"));
        }
        let gamma = match momentum {
            Momentum::Adaptive { gamma1, p } => {
                if !(0.0..1.0).contains(&gamma1) || !(p > 0.0 && p < 1.0) {
                    return Err(NortError::config(format!(
                        "momentum needs gamma1 in [0, 1) and p in (0, 1), got {gamma1}, {p}"
                    )));
                }
                gamma1
            }
            _ => 0.0,
        };
        let shape = obj.shape();
        let zeros: Vec<Arc<FactorPair>> = obj
            .modes()
            .map(|m| Arc::new(FactorPair::zero(m, shape)))
            .collect();
        Ok(PaSolver {
            obj,
            cfg,
            momentum,
            tau,
            validation: None,
            y_prev: zeros.clone(),
            y_cur: zeros,
            bases: vec![None; obj.d()],
            gamma,
            nesterov_theta: 1.0,
            f_cur: None,
            res_cur: None,
            t: 1,
            trace: Vec::new(),
            started: Instant::now(),
            stop: None,
            peak_storage_bytes: 0,
        })
    }

    /// Records validation RMSE in the trace.
    pub fn with_validation(mut self, val: &'a SparseTensor3) -> Self {
        self.validation = Some(val);
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    /// The current iterate `X_t = (1/D) sum_i fold(U_i V_i^T)`.
    pub fn iterate(&self) -> FactorTensor {
        average(self.obj, &self.y_cur, 1.0)
    }

    /// Factor pairs of the current iterate, one per regularized mode.
    pub fn factors(&self) -> &[Arc<FactorPair>] {
        &self.y_cur
    }

    fn objective_at(&self, x: &FactorTensor, residual: &SparseTensor3) -> Result<f64> {
        self.obj
            .evaluate_with_residual(x, residual, self.cfg.f_eval, &self.cfg.svd)
    }

    /// One iteration. Returns the new trace record; after a stop condition
    /// further calls are no-ops returning the last record.
    pub fn step(&mut self) -> Result<&TraceRecord> {
        if self.stop.is_some() {
            return self
                .trace
                .last()
                .ok_or_else(|| NortError::config("solver stopped before running"));
        }
        let obj = self.obj;
        let x_cur = self.iterate();
        if self.res_cur.is_none() {
            self.res_cur = Some(sparse_residual(&x_cur, &obj.obs)?);
        }

        // Extrapolation.
        let (v, residual_v, gamma_used, accepted) = match self.momentum {
            Momentum::None => (x_cur, self.res_cur.clone().unwrap(), 0.0, false),
            Momentum::Adaptive { p, .. } => {
                let g = self.gamma;
                let x_bar = self.extrapolated(g)?;
                let same = self
                    .y_cur
                    .iter()
                    .zip(&self.y_prev)
                    .all(|(a, b)| Arc::ptr_eq(a, b))
                    || g == 0.0;
                let res_cur = self.res_cur.clone().unwrap();
                let f_cur = match self.f_cur {
                    Some(f) => f,
                    None => {
                        let f = self.objective_at(&x_cur, &res_cur)?;
                        self.f_cur = Some(f);
                        f
                    }
                };
                if same {
                    self.gamma = (g / p).min(1.0);
                    (x_cur, res_cur, g, true)
                } else {
                    let res_bar = sparse_residual(&x_bar, &obj.obs)?;
                    let f_bar = self.objective_at(&x_bar, &res_bar)?;
                    if f_bar <= f_cur {
                        self.gamma = (g / p).min(1.0);
                        (x_bar, res_bar, g, true)
                    } else {
                        self.gamma = p * g;
                        (x_cur, res_cur, g, false)
                    }
                }
            }
            Momentum::Nesterov => {
                let th = self.nesterov_theta;
                let th_next = 0.5 * (1.0 + (1.0 + 4.0 * th * th).sqrt());
                let beta = (th - 1.0) / th_next;
                self.nesterov_theta = th_next;
                let x_bar = self.extrapolated(beta)?;
                let res = if beta == 0.0 {
                    self.res_cur.clone().unwrap()
                } else {
                    sparse_residual(&x_bar, &obj.obs)?
                };
                (x_bar, res, beta, true)
            }
        };

        // Z = V - (1/tau) P_Omega(V - O), then one proximal step per mode.
        let z = SplrOperator::new(v.clone(), Some((-1.0 / self.tau, residual_v.clone())))?;
        let modes: Vec<Mode> = obj.modes().collect();
        let prox_one = |i: usize| -> Result<ProxOut> {
            let mode = modes[i];
            let prev_rank = self.y_cur[i].rank();
            let rank_hint = if self.t == 1 {
                self.cfg.initial_rank
            } else {
                prev_rank + 1
            };
            let opts = GsvtOptions {
                rank_hint: rank_hint.max(1),
                max_rank: self.cfg.max_rank[mode.index()],
                svd: self.cfg.svd,
                warm_start: self.bases[i].as_ref(),
            };
            let r = gsvt(&z.view(mode), &obj.penalty, obj.lambda[i] / self.tau, &opts)?;
            let pair = FactorPair::new(mode, obj.shape(), r.u, r.v)?;
            Ok(ProxOut {
                pair: Arc::new(pair),
                basis: r.basis,
            })
        };
        let outs: Vec<ProxOut> = if self.cfg.parallel_modes && modes.len() > 1 {
            (0..modes.len())
                .into_par_iter()
                .map(prox_one)
                .collect::<Result<_>>()?
        } else {
            (0..modes.len()).map(prox_one).collect::<Result<_>>()?
        };

        let mut new_pairs = Vec::with_capacity(outs.len());
        for (i, o) in outs.into_iter().enumerate() {
            self.bases[i] = Some(o.basis);
            new_pairs.push(o.pair);
        }
        let storage = self.storage_bytes(&new_pairs, &residual_v);
        self.peak_storage_bytes = self.peak_storage_bytes.max(storage);
        self.y_prev = std::mem::replace(&mut self.y_cur, new_pairs);
        let x_next = self.iterate();

        // ||X_{t+1} - V_t||_F without densifying.
        let mut diff = x_next.clone();
        diff.extend_scaled(-1.0, &v)?;
        let step_abs = factor_norm(&diff);
        let x_norm = factor_norm(&x_next);
        let step_norm = if x_norm > 0.0 {
            step_abs / x_norm
        } else {
            step_abs
        };

        let res_next = sparse_residual(&x_next, &obj.obs)?;
        let need_f =
            self.cfg.record_objective || matches!(self.momentum, Momentum::Adaptive { .. });
        let objective = if need_f {
            self.objective_at(&x_next, &res_next)?
        } else {
            f64::NAN
        };
        self.f_cur = need_f.then_some(objective);
        self.res_cur = Some(res_next);
        let val_rmse = match self.validation {
            Some(val) => Some(rmse_factored(&x_next, val)?),
            None => None,
        };

        let mut ranks = [0; 3];
        for (i, p) in self.y_cur.iter().enumerate() {
            ranks[i] = p.rank();
        }
        self.trace.push(TraceRecord {
            iteration: self.t,
            seconds: self.started.elapsed().as_secs_f64(),
            objective,
            val_rmse,
            ranks,
            gamma: gamma_used,
            accepted,
            step_norm,
            step_abs,
        });
        if step_abs == 0.0 {
            self.stop = Some(StopReason::CriticalPoint);
        } else if step_norm <= self.cfg.tol {
            self.stop = Some(StopReason::Converged);
        } else if self.t >= self.cfg.max_iters {
            self.stop = Some(StopReason::MaxIters);
        }
        self.t += 1;
        Ok(self.trace.last().expect("just pushed"))
    }

    /// `X_t + g (X_t - X_{t-1})` in factor form.
    fn extrapolated(&self, g: f64) -> Result<FactorTensor> {
        let mut x = average(self.obj, &self.y_cur, 1.0 + g);
        if g != 0.0 {
            x.extend_scaled(1.0, &average(self.obj, &self.y_prev, -g))?;
        }
        Ok(x)
    }

    fn storage_bytes(&self, new_pairs: &[Arc<FactorPair>], residual: &SparseTensor3) -> usize {
        let factors: usize = self
            .y_cur
            .iter()
            .chain(&self.y_prev)
            .chain(new_pairs)
            .map(|p| p.storage_len())
            .sum();
        let bases: usize = self.bases.iter().flatten().map(|b| b.len()).sum();
        let sparse = self.obj.obs.storage_bytes() + residual.values().len() * 8;
        8 * (factors + bases) + sparse
    }

    /// Runs until a stop condition.
    pub fn run(mut self) -> Result<Solution> {
        while self.stop.is_none() {
            self.step()?;
        }
        Ok(self.finish())
    }

    /// Packages the current state.
    pub fn finish(self) -> Solution {
        Solution {
            estimate: Estimate::Factored(average(self.obj, &self.y_cur, 1.0)),
            trace: self.trace,
            stop: self.stop.unwrap_or(StopReason::MaxIters),
            tau: self.tau,
            peak_storage_bytes: self.peak_storage_bytes,
        }
    }
}

/// `(scale / D) sum_i fold(pair_i)`.
fn average(obj: &Objective, pairs: &[Arc<FactorPair>], scale: f64) -> FactorTensor {
    let c = scale / obj.d() as f64;
    let mut x = FactorTensor::zeros(obj.shape());
    for p in pairs {
        x.push(c, p.clone())
            .expect("pairs match the objective shape");
    }
    x
}

/// NORT: proximal average with adaptive momentum.
pub fn nort_solve(obj: &Objective, cfg: &SolverConfig) -> Result<Solution> {
    let m = Momentum::Adaptive {
        gamma1: cfg.gamma1,
        p: cfg.p,
    };
    PaSolver::new(obj, *cfg, m)?.run()
}

/// sNORT: the same iteration without momentum.
pub fn snort_solve(obj: &Objective, cfg: &SolverConfig) -> Result<Solution> {
    PaSolver::new(obj, *cfg, Momentum::None)?.run()
}

/// Convex baseline: overlapped nuclear norm with accelerated extrapolation.
pub fn pa_apg_solve(obj: &Objective, cfg: &SolverConfig) -> Result<Solution> {
    if obj.penalty != Penalty::Nuclear {
        return Err(NortError::config(format!(
            "PA-APG solves the convex problem, got penalty {}",
            obj.penalty
        )));
    }
    PaSolver::new(obj, *cfg, Momentum::Nesterov)?.run()
}

/// Matrix completion on the mode-1 unfolding; identical to NORT with `D = 1`.
pub fn matrix_complete(obj: &Objective, cfg: &SolverConfig) -> Result<Solution> {
    if obj.d() != 1 {
        return Err(NortError::config(format!(
            "matrix completion needs D = 1, got {}",
            obj.d()
        )));
    }
    nort_solve(obj, cfg)
}
