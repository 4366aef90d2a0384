//! Proximal-average solvers.
//!
//! [`PaSolver`] keeps every iterate as an average of folded low-rank factor
//! pairs and forms each proximal input as a [`SplrOperator`]. The momentum
//! policy selects NORT (adaptive), sNORT (none) or the convex PA-APG
//! baseline (Nesterov). [`Gdpan`] runs the same iteration on dense tensors.
//!
//! [`SplrOperator`]: crate::splr::SplrOperator

mod gdpan;
mod objective;
mod pa;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{NortError, Result};
use crate::svd::SvdConfig;
use crate::tensor::{DenseTensor3, FactorTensor, SparseTensor3};

pub use gdpan::{gdpan_solve, Gdpan, GDPAN_MAX_ENTRIES};
pub use objective::{FEval, Objective};
pub use pa::{matrix_complete, nort_solve, pa_apg_solve, snort_solve, Momentum, PaSolver};

/// Which driver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Nort,
    Snort,
    Gdpan,
    PaApg,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Nort => "nort",
            SolverKind::Snort => "snort",
            SolverKind::Gdpan => "gdpan",
            SolverKind::PaApg => "pa-apg",
        }
    }

    /// Runs the driver, recording validation RMSE when `val` is given.
    pub fn solve(
        &self,
        obj: &Objective,
        cfg: &SolverConfig,
        val: Option<&SparseTensor3>,
    ) -> Result<Solution> {
        match self {
            SolverKind::Gdpan => {
                let mut s = Gdpan::new(obj, *cfg)?;
                if let Some(v) = val {
                    s = s.with_validation(v);
                }
                s.run()
            }
            SolverKind::PaApg if obj.penalty != crate::penalty::Penalty::Nuclear => {
                Err(NortError::config(format!(
                    "pa-apg solves the convex problem, got penalty {}",
                    obj.penalty
                )))
            }
            _ => {
                let momentum = match self {
                    SolverKind::Nort => Momentum::Adaptive {
                        gamma1: cfg.gamma1,
                        p: cfg.p,
                    },
                    SolverKind::PaApg => Momentum::Nesterov,
                    _ => Momentum::None,
                };
                let mut s = PaSolver::new(obj, *cfg, momentum)?;
                if let Some(v) = val {
                    s = s.with_validation(v);
                }
                s.run()
            }
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = NortError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nort" => Ok(SolverKind::Nort),
            "snort" => Ok(SolverKind::Snort),
            "gdpan" => Ok(SolverKind::Gdpan),
            "pa-apg" | "apg" => Ok(SolverKind::PaApg),
            other => Err(NortError::config(format!(
                "unknown solver {other:?}, expected nort|snort|gdpan|pa-apg"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Step parameter; `None` picks `1.01 (rho + D L)`.
    pub tau: Option<f64>,
    pub gamma1: f64,
    pub p: f64,
    pub max_iters: usize,
    /// Stop when `||X_{t+1} - V_t||_F / ||X_{t+1}||_F` falls to this.
    pub tol: f64,
    /// Per-mode cap on the rank of each proximal output.
    pub max_rank: [Option<usize>; 3],
    /// Rank requested from the first SVD of each mode.
    pub initial_rank: usize,
    pub svd: SvdConfig,
    pub f_eval: FEval,
    /// Evaluate `F` at every iterate for the trace. Adaptive momentum
    /// evaluates it regardless.
    pub record_objective: bool,
    /// Run the per-mode proximal steps on the rayon pool.
    pub parallel_modes: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: None,
            gamma1: 0.1,
            p: 0.5,
            max_iters: 500,
            tol: 1e-5,
            max_rank: [None; 3],
            initial_rank: 5,
            svd: SvdConfig::default(),
            f_eval: FEval::Factored,
            record_objective: true,
            parallel_modes: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 >= 0.0 && self.gamma1 < 1.0) {
            return Err(NortError::config(format!(
                "gamma1 must lie in [0, 1), got {}",
                self.gamma1
            )));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(NortError::config(format!(
                "p must lie in (0, 1), got {}",
                self.p
            )));
        }
        if self.max_iters == 0 {
            return Err(NortError::config("max_iters must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(NortError::config(format!(
                "tol must be >= 0, got {}",
                self.tol
            )));
        }
        self.svd.validate()
    }

    /// The step parameter for `obj`, checked against `rho + D L`.
    pub fn resolve_tau(&self, obj: &Objective) -> Result<f64> {
        let floor = obj.tau_floor();
        match self.tau {
            None => Ok(1.01 * floor),
            Some(t) if t > floor && t.is_finite() => Ok(t),
            Some(t) => Err(NortError::config(format!(
                "tau = {t} must exceed rho + D L = {floor}"
            ))),
        }
    }
}

/// One row of a solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Wall time since the solver started.
    pub seconds: f64,
    /// `F(X_{t+1})`, NaN when not evaluated.
    pub objective: f64,
    pub val_rmse: Option<f64>,
    /// Rank of each mode's proximal output (0 for unregularized modes).
    pub ranks: [usize; 3],
    /// Momentum weight used for this iteration's extrapolation.
    pub gamma: f64,
    pub accepted: bool,
    /// `||X_{t+1} - V_t||_F / ||X_{t+1}||_F`.
    pub step_norm: f64,
    /// `||X_{t+1} - V_t||_F`.
    pub step_abs: f64,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str = "iteration,seconds,F,val_rmse,k1,k2,k3,gamma,accepted";

    pub fn csv_row(&self) -> String {
        let val = self.val_rmse.map(|v| format!("{v:e}")).unwrap_or_default();
        format!(
            "{},{:.6},{:e},{},{},{},{},{},{}",
            self.iteration,
            self.seconds,
            self.objective,
            val,
            self.ranks[0],
            self.ranks[1],
            self.ranks[2],
            self.gamma,
            u8::from(self.accepted)
        )
    }
}

/// Writes a trace as CSV.
pub fn write_trace_csv<W: std::io::Write>(trace: &[TraceRecord], mut w: W) -> Result<()> {
    writeln!(w, "{}", TraceRecord::CSV_HEADER)?;
    for r in trace {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Relative step fell below the tolerance.
    Converged,
    /// The step was exactly zero: the iterate is a critical point.
    CriticalPoint,
    MaxIters,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::CriticalPoint => "critical-point",
            StopReason::MaxIters => "max-iters",
        })
    }
}

/// A recovered tensor, factored or dense.
#[derive(Debug, Clone)]
pub enum Estimate {
    Factored(FactorTensor),
    Dense(DenseTensor3),
}

impl Estimate {
    pub fn to_dense(&self) -> DenseTensor3 {
        match self {
            Estimate::Factored(x) => x.to_dense(),
            Estimate::Dense(x) => x.clone(),
        }
    }

    /// Values of the estimate on the pattern of `reference`.
    pub fn values_on(&self, reference: &SparseTensor3) -> Result<Vec<f64>> {
        match self {
            Estimate::Factored(x) => x.values_on(reference.pattern()),
            Estimate::Dense(x) => {
                if x.shape() != reference.shape() {
                    return Err(NortError::shape(format!(
                        "{} vs {}",
                        x.shape(),
                        reference.shape()
                    )));
                }
                Ok(reference.indices().iter().map(|&i| x.get(i)).collect())
            }
        }
    }

    /// Storage held by the estimate, in f64 values.
    pub fn storage_len(&self) -> usize {
        match self {
            Estimate::Factored(x) => x.storage_len(),
            Estimate::Dense(x) => x.as_slice().len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub estimate: Estimate,
    pub trace: Vec<TraceRecord>,
    pub stop: StopReason,
    pub tau: f64,
    /// Largest solver-held storage over the run, in bytes.
    pub peak_storage_bytes: usize,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.trace.last().map_or([0; 3], |r| r.ranks)
    }
}
