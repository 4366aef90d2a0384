//! Experiment configuration.
//!
//! The file grammar is line based: `[section]` headers, `key = value`
//! pairs, and `#` comments running to the end of a line. Keys are
//! addressed as `section.key`; keys before any header live in no section.
//! Grid-valued keys take whitespace- or comma-separated lists.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::synth::{ObsRule, SynthSpec};
use crate::error::{NortError, Result};
use crate::penalty::Penalty;
use crate::solver::{FEval, SolverConfig, SolverKind};

/// One `key = value` line, with its section and 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses the key-value grammar into fully qualified `section.key` entries.
pub fn parse_key_values(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                NortError::config(format!("line {line_no}: unterminated section header"))
            })?;
            let name = name.trim();
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(NortError::config(format!(
                    "line {line_no}: bad section name {name:?}"
                )));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            NortError::config(format!(
                "line {line_no}: expected `key = value`, got {line:?}"
            ))
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(NortError::config(format!("line {line_no}: empty key")));
        }
        let key = if section.is_empty() {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        out.push(Entry {
            key,
            value: v.trim().to_string(),
            line: line_no,
        });
    }
    Ok(out)
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "source")]
pub enum DataSource {
    Synth(SynthSpec),
    /// Observed entries in a COO file, split into train and validation.
    Coo {
        path: PathBuf,
        /// Optional held-out entries for test RMSE.
        test_path: Option<PathBuf>,
    },
    /// A complete tensor; entries are sampled as in the synthetic protocol.
    Dense {
        path: PathBuf,
    },
    /// A stack of PPM images; entries are sampled as in the synthetic protocol.
    Ppm {
        paths: Vec<PathBuf>,
    },
}

/// Number of regularized modes, or the size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeCount {
    /// `D = 2` when `I3 <= 10`, else `D = 3`.
    Auto,
    Fixed(usize),
}

impl ModeCount {
    pub fn resolve(&self, i3: usize) -> usize {
        match *self {
            ModeCount::Auto => {
                if i3 <= 10 {
                    2
                } else {
                    3
                }
            }
            ModeCount::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Sampling for dense and image sources.
    pub observed: ObsRule,
    pub train_fraction: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub solver: SolverKind,
    /// Regularizer name: `nn`, `capped-l1`, `lsp` or `tnn`.
    pub reg: String,
    pub lambda_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub modes: ModeCount,
    pub solver_cfg: SolverConfig,
    pub output_dir: Option<PathBuf>,
    pub write_traces: bool,
    /// Evaluate grid cells concurrently.
    pub parallel_grid: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synth(SynthSpec::default()),
            observed: ObsRule::LogRule,
            train_fraction: 0.5,
            noise_std: 0.0,
            seed: 0,
            solver: SolverKind::Nort,
            reg: "capped-l1".into(),
            lambda_grid: vec![1.0],
            theta_grid: vec![1.0],
            modes: ModeCount::Auto,
            solver_cfg: SolverConfig::default(),
            output_dir: None,
            write_traces: true,
            parallel_grid: false,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| NortError::config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<T> = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(NortError::config(format!("{key}: empty list")));
    }
    Ok(items)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(NortError::config(format!(
            "{key}: expected a boolean, got {v:?}"
        ))),
    }
}

fn optional<T: std::str::FromStr>(key: &str, v: &str) -> Result<Option<T>> {
    if matches!(v, "auto" | "none") {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

impl ExperimentConfig {
    /// Reads a config file and applies it over the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for e in parse_key_values(text)? {
            cfg.set(&e.key, &e.value)
                .map_err(|err| NortError::config(format!("line {}: {err}", e.line)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| NortError::config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_text(&text)
    }

    fn synth_mut(&mut self, key: &str) -> Result<&mut SynthSpec> {
        match &mut self.data {
            DataSource::Synth(s) => Ok(s),
            _ => Err(NortError::config(format!(
                "{key} applies only to synthetic data"
            ))),
        }
    }

    /// Sets one `section.key`; shared by the file parser and CLI overrides.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let sc = &mut self.solver_cfg;
        match key {
            "data.source" => {
                self.data = match v {
                    "synth" => DataSource::Synth(SynthSpec {
                        seed: self.seed,
                        ..SynthSpec::default()
                    }),
                    "coo" => DataSource::Coo {
                        path: PathBuf::new(),
                        test_path: None,
                    },
                    "dense" => DataSource::Dense {
                        path: PathBuf::new(),
                    },
                    "ppm" => DataSource::Ppm { paths: Vec::new() },
                    _ => {
                        return Err(NortError::config(format!(
                            "data.source: expected synth|coo|dense|ppm, got {v:?}"
                        )))
                    }
                }
            }
            "data.dims" => {
                let d: Vec<usize> = list(key, v)?;
                let [a, b, c] = d[..] else {
                    return Err(NortError::config("data.dims: expected three extents"));
                };
                self.synth_mut(key)?.dims = [a, b, c];
            }
            "data.rank" => self.synth_mut(key)?.rank = num(key, v)?,
            "data.noise_std" => {
                self.noise_std = num(key, v)?;
                if let DataSource::Synth(s) = &mut self.data {
                    s.noise_std = self.noise_std;
                }
            }
            "data.observed" => {
                self.observed = match v {
                    "log" => ObsRule::LogRule,
                    _ if v.contains('.') || v.contains('e') => ObsRule::Fraction(num(key, v)?),
                    _ => ObsRule::Count(num(key, v)?),
                };
                if let DataSource::Synth(s) = &mut self.data {
                    s.observed = self.observed;
                }
            }
            "data.train_fraction" => {
                self.train_fraction = num(key, v)?;
                if let DataSource::Synth(s) = &mut self.data {
                    s.train_fraction = self.train_fraction;
                }
            }
            "data.seed" | "seed" => {
                self.seed = num(key, v)?;
                if let DataSource::Synth(s) = &mut self.data {
                    s.seed = self.seed;
                }
            }
            "data.path" => match &mut self.data {
                DataSource::Coo { path, .. } | DataSource::Dense { path } => *path = v.into(),
                DataSource::Ppm { paths } => *paths = vec![v.into()],
                DataSource::Synth(_) => {
                    return Err(NortError::config("data.path needs source = coo|dense|ppm"))
                }
            },
            "data.paths" => match &mut self.data {
                DataSource::Ppm { paths } => {
                    *paths = v.split_whitespace().map(PathBuf::from).collect();
                }
                _ => return Err(NortError::config("data.paths needs source = ppm")),
            },
            "data.test_path" => match &mut self.data {
                DataSource::Coo { test_path, .. } => *test_path = Some(v.into()),
                _ => return Err(NortError::config("data.test_path needs source = coo")),
            },
            "solver.name" => self.solver = v.parse()?,
            "solver.reg" => {
                Penalty::from_name(v, 1.0)?;
                self.reg = v.to_string();
            }
            "solver.lambda" => self.lambda_grid = list(key, v)?,
            "solver.theta" => self.theta_grid = list(key, v)?,
            "solver.D" | "solver.d" => {
                self.modes = if v == "auto" {
                    ModeCount::Auto
                } else {
                    ModeCount::Fixed(num(key, v)?)
                }
            }
            "solver.tau" => sc.tau = optional(key, v)?,
            "solver.gamma1" => sc.gamma1 = num(key, v)?,
            "solver.p" => sc.p = num(key, v)?,
            "solver.max_iters" => sc.max_iters = num(key, v)?,
            "solver.tol" => sc.tol = num(key, v)?,
            "solver.max_rank" => sc.max_rank = [optional(key, v)?; 3],
            "solver.initial_rank" => sc.initial_rank = num(key, v)?,
            "solver.f_eval" => {
                sc.f_eval = match v {
                    "factored" => FEval::Factored,
                    "dense" => FEval::Dense,
                    _ => return Err(NortError::config(format!("{key}: expected factored|dense"))),
                }
            }
            "solver.record_objective" => sc.record_objective = boolean(key, v)?,
            "solver.parallel_modes" => sc.parallel_modes = boolean(key, v)?,
            "svd.tol" => sc.svd.tol = num(key, v)?,
            "svd.iters" | "svd.max_power_iters" => sc.svd.max_power_iters = num(key, v)?,
            "svd.restarts" => sc.svd.max_restarts = num(key, v)?,
            "svd.oversampling" => sc.svd.oversampling = num(key, v)?,
            "svd.seed" => sc.svd.seed = num(key, v)?,
            "output.dir" => self.output_dir = Some(v.into()),
            "output.traces" => self.write_traces = boolean(key, v)?,
            "run.parallel" => self.parallel_grid = boolean(key, v)?,
            _ => return Err(NortError::config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.theta_grid.is_empty() {
            return Err(NortError::config("lambda and theta grids must be nonempty"));
        }
        for &t in &self.theta_grid {
            Penalty::from_name(&self.reg, t)?;
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l > 0.0)) {
            return Err(NortError::config(format!(
                "lambda must be positive, got {l}"
            )));
        }
        if self.solver == SolverKind::PaApg && self.reg != "nn" {
            return Err(NortError::config(format!(
                "pa-apg solves the convex problem; use reg = nn, not {}",
                self.reg
            )));
        }
        if let ModeCount::Fixed(d) = self.modes {
            if !(1..=3).contains(&d) {
                return Err(NortError::config(format!("D must be 1, 2 or 3, got {d}")));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(NortError::config(format!(
                "train_fraction must lie in (0, 1) so validation is nonempty, got {}",
                self.train_fraction
            )));
        }
        match &self.data {
            DataSource::Synth(s) => s.validate()?,
            DataSource::Coo { path, .. } | DataSource::Dense { path }
                if path.as_os_str().is_empty() =>
            {
                return Err(NortError::config("data.path is required"))
            }
            DataSource::Ppm { paths } if paths.is_empty() => {
                return Err(NortError::config("data.paths is required for ppm input"))
            }
            _ => {}
        }
        self.solver_cfg.validate()
    }

    /// The `(lambda, theta)` cells to evaluate, in grid order. The nuclear
    /// norm has no `theta`, so only the first value is kept for it.
    pub fn grid(&self) -> Vec<(f64, f64)> {
        let thetas: &[f64] = if self.reg == "nn" {
            &self.theta_grid[..1]
        } else {
            &self.theta_grid
        };
        self.lambda_grid
            .iter()
            .flat_map(|&l| thetas.iter().map(move |&t| (l, t)))
            .collect()
    }
}
