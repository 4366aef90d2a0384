use std::time::Instant;

use super::{Estimate, Objective, Solution, SolverConfig, StopReason, TraceRecord};
use crate::data::rmse_dense;
use crate::error::{NortError, Result};
use crate::penalty::gsvt_dense;
use crate::tensor::{DenseTensor3, SparseTensor3};

/// Largest tensor the dense baseline will allocate.
pub const GDPAN_MAX_ENTRIES: usize = 1 << 24;

/// Dense proximal average: explicit fold/unfold and full SVDs each iteration.
#[derive(Clone)]
pub struct Gdpan<'a> {
    obj: &'a Objective,
    cfg: SolverConfig,
    tau: f64,
    validation: Option<&'a SparseTensor3>,
    x: DenseTensor3,
    t: usize,
    trace: Vec<TraceRecord>,
    started: Instant,
    stop: Option<StopReason>,
    peak_storage_bytes: usize,
}

impl<'a> Gdpan<'a> {
    pub fn new(obj: &'a Objective, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let tau = cfg.resolve_tau(obj)?;
        let shape = obj.shape();
        if shape.numel() > GDPAN_MAX_ENTRIES {
            return Err(NortError::config(format!(
                "dense baseline refuses {shape}: {} entries exceed {GDPAN_MAX_ENTRIES}",
                shape.numel()
            )));
        }
        if obj.obs.nnz() == 0 {
            return Err(NortError::config("no observed entries"));
        }
        Ok(Gdpan {
            obj,
            cfg,
            tau,
            validation: None,
            x: DenseTensor3::zeros(shape),
            t: 1,
            trace: Vec::new(),
            started: Instant::now(),
            stop: None,
            peak_storage_bytes: 0,
        })
    }

    pub fn with_validation(mut self, val: &'a SparseTensor3) -> Self {
        self.validation = Some(val);
        self
    }

    pub fn iterate(&self) -> &DenseTensor3 {
        &self.x
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn step(&mut self) -> Result<&TraceRecord> {
        if self.stop.is_some() {
            return self
                .trace
                .last()
                .ok_or_else(|| NortError::config("solver stopped before running"));
        }
        let obj = self.obj;
        let shape = obj.shape();
        let d = obj.d() as f64;

        let mut z = self.x.clone();
        for (idx, o) in obj.obs.iter() {
            let r = self.x.get(idx) - o;
            z.set(idx, z.get(idx) - r / self.tau);
        }
        let mut next = DenseTensor3::zeros(shape);
        let mut ranks = [0; 3];
        let mut unfold_peak = 0;
        for (i, mode) in obj.modes().enumerate() {
            let zm = z.unfold(mode);
            let prox = gsvt_dense(&zm, &obj.penalty, obj.lambda[i] / self.tau)?;
            unfold_peak = unfold_peak
                .max(zm.len() + prox.basis.len() + zm.ncols() * zm.nrows().min(zm.ncols()));
            ranks[mode.index()] = prox.rank();
            let y = DenseTensor3::fold(&(&prox.u * prox.v.transpose()), mode, shape)?;
            next.axpy(1.0 / d, &y)?;
        }
        let storage = 8 * (3 * shape.numel() + unfold_peak) + obj.obs.storage_bytes();
        self.peak_storage_bytes = self.peak_storage_bytes.max(storage);

        let mut diff = next.clone();
        diff.axpy(-1.0, &self.x)?;
        let step_abs = diff.fro_norm();
        let x_norm = next.fro_norm();
        let step_norm = if x_norm > 0.0 {
            step_abs / x_norm
        } else {
            step_abs
        };
        self.x = next;

        let objective = if self.cfg.record_objective {
            obj.evaluate_dense(&self.x)?
        } else {
            f64::NAN
        };
        let val_rmse = match self.validation {
            Some(v) => Some(rmse_dense(&self.x, v)?),
            None => None,
        };
        self.trace.push(TraceRecord {
            iteration: self.t,
            seconds: self.started.elapsed().as_secs_f64(),
            objective,
            val_rmse,
            ranks,
            gamma: 0.0,
            accepted: false,
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

    pub fn run(mut self) -> Result<Solution> {
        while self.stop.is_none() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> Solution {
        Solution {
            estimate: Estimate::Dense(self.x),
            trace: self.trace,
            stop: self.stop.unwrap_or(StopReason::MaxIters),
            tau: self.tau,
            peak_storage_bytes: self.peak_storage_bytes,
        }
    }
}

/// Runs the dense baseline to a stop condition.
pub fn gdpan_solve(obj: &Objective, cfg: &SolverConfig) -> Result<Solution> {
    Gdpan::new(obj, *cfg)?.run()
}
