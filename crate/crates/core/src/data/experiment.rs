use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{DataSource, ExperimentConfig};
use super::metrics::rmse;
use super::ppm::ingest_ppm;
use super::synth::{synth_generate, ObsRule};
use crate::error::{NortError, Result};
use crate::penalty::Penalty;
use crate::solver::{write_trace_csv, Estimate, Objective, Solution, StopReason};
use crate::tensor::io::{load_coo, load_dense};
use crate::tensor::{DenseTensor3, Shape3, SparseTensor3};

/// Train, validation and optional test entries for one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: SparseTensor3,
    pub val: SparseTensor3,
    pub test: Option<SparseTensor3>,
}

impl ExperimentData {
    pub fn shape(&self) -> Shape3 {
        self.train.shape()
    }
}

/// Samples observed entries of a complete tensor and splits them.
pub fn sample_dense(
    full: &DenseTensor3,
    observed: ObsRule,
    train_fraction: f64,
    noise_std: f64,
    seed: u64,
) -> Result<ExperimentData> {
    let shape = full.shape();
    let n = observed.count(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, shape.numel(), n).into_vec();
    picked.shuffle(&mut rng);
    let noise = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| NortError::config(e.to_string()))?)
    } else {
        None
    };
    let obs: Vec<([usize; 3], f64)> = picked
        .iter()
        .map(|&l| {
            let e = noise.map_or(0.0, |d| d.sample(&mut rng));
            (shape.delinear(l), full.as_slice()[l] + e)
        })
        .collect();
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let mut mask = vec![false; shape.numel()];
    for &l in &picked {
        mask[l] = true;
    }
    let test: Vec<_> = (0..shape.numel())
        .filter(|&l| !mask[l])
        .map(|l| (shape.delinear(l), full.as_slice()[l]))
        .collect();
    Ok(ExperimentData {
        train: SparseTensor3::from_entries(shape, obs[..n_train].to_vec())?,
        val: SparseTensor3::from_entries(shape, obs[n_train..].to_vec())?,
        test: (!test.is_empty())
            .then(|| SparseTensor3::from_entries(shape, test))
            .transpose()?,
    })
}

/// Splits observed entries uniformly at random.
pub fn split_observed(
    obs: &SparseTensor3,
    train_fraction: f64,
    seed: u64,
) -> Result<(SparseTensor3, SparseTensor3)> {
    let mut entries: Vec<_> = obs.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    entries.shuffle(&mut rng);
    let n_train = ((entries.len() as f64) * train_fraction).round() as usize;
    let val = entries.split_off(n_train);
    Ok((
        SparseTensor3::from_entries(obs.shape(), entries)?,
        SparseTensor3::from_entries(obs.shape(), val)?,
    ))
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let sample = |full: DenseTensor3| {
        sample_dense(
            &full,
            cfg.observed,
            cfg.train_fraction,
            cfg.noise_std,
            cfg.seed,
        )
    };
    match &cfg.data {
        DataSource::Synth(spec) => {
            let d = synth_generate(spec)?;
            Ok(ExperimentData {
                train: d.train,
                val: d.val,
                test: (d.test.nnz() > 0).then_some(d.test),
            })
        }
        DataSource::Coo { path, test_path } => {
            let obs = load_coo(path)?;
            let (train, val) = split_observed(&obs, cfg.train_fraction, cfg.seed)?;
            let test = test_path.as_ref().map(load_coo).transpose()?;
            if let Some(t) = &test {
                if t.shape() != obs.shape() {
                    return Err(NortError::shape(format!(
                        "test entries are {} but observations are {}",
                        t.shape(),
                        obs.shape()
                    )));
                }
            }
            Ok(ExperimentData { train, val, test })
        }
        DataSource::Dense { path } => sample(load_dense(path)?),
        DataSource::Ppm { paths } => sample(ingest_ppm(paths)?),
    }
}

/// Result of one grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub lambda: f64,
    pub theta: f64,
    pub val_rmse: Option<f64>,
    pub test_rmse: Option<f64>,
    pub iterations: usize,
    pub final_objective: Option<f64>,
    pub ranks: [usize; 3],
    pub stop: Option<StopReason>,
    pub peak_storage_bytes: usize,
    pub seconds: f64,
    pub trace_file: Option<PathBuf>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DataSummary {
    pub shape: [usize; 3],
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub solver: String,
    pub reg: String,
    pub d: usize,
    pub tau: Option<f64>,
    pub data: DataSummary,
    pub cells: Vec<CellReport>,
    /// Index into `cells` of the lowest validation RMSE.
    pub best: Option<usize>,
    pub best_test_rmse: Option<f64>,
    pub seconds: f64,
}

impl ExperimentReport {
    pub fn best_cell(&self) -> Option<&CellReport> {
        self.best.map(|i| &self.cells[i])
    }
}

fn fmt_param(v: f64) -> String {
    format!("{v}").replace('-', "m")
}

fn run_cell(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    d: usize,
    lambda: f64,
    theta: f64,
) -> (CellReport, Result<Solution>) {
    let started = Instant::now();
    let mut report = CellReport {
        lambda,
        theta,
        val_rmse: None,
        test_rmse: None,
        iterations: 0,
        final_objective: None,
        ranks: [0; 3],
        stop: None,
        peak_storage_bytes: 0,
        seconds: 0.0,
        trace_file: None,
        error: None,
    };
    let outcome = (|| -> Result<Solution> {
        let penalty = Penalty::from_name(&cfg.reg, theta)?;
        let obj = Objective::uniform(data.train.clone(), lambda, d, penalty)?;
        cfg.solver.solve(&obj, &cfg.solver_cfg, Some(&data.val))
    })();
    report.seconds = started.elapsed().as_secs_f64();
    match &outcome {
        Ok(sol) => {
            report.iterations = sol.iterations();
            report.final_objective = Some(sol.final_objective()).filter(|f| f.is_finite());
            report.ranks = sol.ranks();
            report.stop = Some(sol.stop);
            report.peak_storage_bytes = sol.peak_storage_bytes;
            report.val_rmse = rmse(&sol.estimate, &data.val).ok();
            report.test_rmse = data.test.as_ref().and_then(|t| rmse(&sol.estimate, t).ok());
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    (report, outcome)
}

/// Grid search over `(lambda, theta)` on validation RMSE.
///
/// Failed cells are recorded and skipped. Fails only when every cell fails.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_estimate(cfg).map(|(r, _)| r)
}

/// [`run_experiment`], also returning the estimate of the best cell.
pub fn run_experiment_with_estimate(
    cfg: &ExperimentConfig,
) -> Result<(ExperimentReport, Estimate)> {
    cfg.validate()?;
    let started = Instant::now();
    let data = load_data(cfg)?;
    let shape = data.shape();
    let d = cfg.modes.resolve(shape.dims()[2]);
    let grid = cfg.grid();
    let run = |&(l, t): &(f64, f64)| {
        let (mut rep, sol) = run_cell(cfg, &data, d, l, t);
        if let (Some(dir), Ok(sol), true) = (&cfg.output_dir, &sol, cfg.write_traces) {
            let name = format!(
                "trace_{}_{}_l{}_t{}.csv",
                cfg.solver,
                cfg.reg,
                fmt_param(l),
                fmt_param(t)
            );
            match write_trace_file(&dir.join(&name), sol) {
                Ok(()) => rep.trace_file = Some(PathBuf::from(name)),
                Err(e) => rep.error = Some(format!("trace not written: {e}")),
            }
        }
        (rep, sol)
    };
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
    }
    let results: Vec<(CellReport, Result<Solution>)> = if cfg.parallel_grid {
        grid.par_iter().map(run).collect()
    } else {
        grid.iter().map(run).collect()
    };
    let tau = results
        .iter()
        .find_map(|(_, s)| s.as_ref().ok().map(|s| s.tau));
    let config_failures = results
        .iter()
        .filter(|(_, s)| matches!(s, Err(NortError::Config(_))))
        .count();
    let (cells, outcomes): (Vec<CellReport>, Vec<Result<Solution>>) = results.into_iter().unzip();
    let mut solutions: Vec<Option<Solution>> = outcomes.into_iter().map(|o| o.ok()).collect();
    let best = cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.val_rmse.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    let Some(best_idx) = best else {
        let first = cells
            .iter()
            .find_map(|c| c.error.clone())
            .unwrap_or_else(|| "no grid cell produced a solution".into());
        if config_failures == cells.len() {
            return Err(NortError::config(format!(
                "every grid cell was rejected: {first}"
            )));
        }
        return Err(NortError::Numerical {
            message: format!("every grid cell failed; first error: {first}"),
            residual: f64::NAN,
        });
    };
    let estimate = solutions[best_idx]
        .take()
        .map(|s| s.estimate)
        .expect("best cell has a solution");
    let report = ExperimentReport {
        solver: cfg.solver.to_string(),
        reg: cfg.reg.clone(),
        d,
        tau,
        data: DataSummary {
            shape: shape.dims(),
            train: data.train.nnz(),
            val: data.val.nnz(),
            test: data.test.as_ref().map_or(0, |t| t.nnz()),
        },
        best_test_rmse: cells[best_idx].test_rmse,
        best,
        cells,
        seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = &cfg.output_dir {
        let f = std::fs::File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), &report)
            .map_err(|e| NortError::Io(e.into()))?;
    }
    Ok((report, estimate))
}

fn write_trace_file(path: &Path, sol: &Solution) -> Result<()> {
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace_csv(&sol.trace, f)
}

/// Report JSON with wall-time fields removed, for determinism checks.
pub fn report_without_timing(report: &ExperimentReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Some(obj) = v.as_object_mut() {
        obj.remove("seconds");
        if let Some(cells) = obj.get_mut("cells").and_then(|c| c.as_array_mut()) {
            for c in cells {
                if let Some(c) = c.as_object_mut() {
                    c.remove("seconds");
                }
            }
        }
    }
    v
}
