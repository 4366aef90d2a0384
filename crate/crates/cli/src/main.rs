//! Command-line front end: synthetic data, completion runs, evaluation and
//! solver comparisons.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use nort::data::{
    rmse_dense, run_experiment, run_experiment_with_estimate, synth_generate, DataSource,
    ExperimentConfig, ExperimentReport, ObsRule, SynthSpec,
};
use nort::solver::SolverKind;
use nort::tensor::io::{load_coo, load_dense, save_coo, save_dense};
use nort::NortError;

#[derive(Parser)]
#[command(
    name = "nort",
    version,
    about = "Low-rank tensor completion with nonconvex regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic CP-rank tensor and its train/validation/test splits.
    Synth(SynthArgs),
    /// Grid-search a solver on validation RMSE and report the best cell.
    Complete(CompleteArgs),
    /// RMSE of a dense estimate against COO reference entries.
    Eval(EvalArgs),
    /// Run several solvers on the same data and compare them.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Extents, e.g. `100,100,5`.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    /// `log` for the I+ I3 ln(Ix) / 5 rule, a fraction such as `0.3`, or a count.
    #[arg(long, default_value = "log")]
    observed: String,
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for train.coo, val.coo, test.coo and truth.dt3.
    #[arg(long)]
    out: PathBuf,
}

/// Options shared by `complete` and `bench`. Each flag overrides the
/// matching config key.
#[derive(Args, Default)]
struct Overrides {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Regularizer: nn, capped-l1, lsp or tnn.
    #[arg(long)]
    reg: Option<String>,
    /// Lambda grid, comma separated.
    #[arg(long)]
    lambda: Option<String>,
    /// Theta grid, comma separated.
    #[arg(long)]
    theta: Option<String>,
    /// Regularized modes: 1, 2, 3 or auto.
    #[arg(long = "D")]
    d: Option<String>,
    /// Step parameter, or `auto`.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    gamma1: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// nort, snort, gdpan or pa-apg.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    svd_tol: Option<String>,
    #[arg(long)]
    svd_iters: Option<String>,
    /// Seed for data generation and splitting.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    noise_std: Option<String>,
    /// Observed entries in a COO file, instead of synthetic data.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out COO entries for test RMSE; used with --data.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Output directory for traces and the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Overrides {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.data {
            cfg.data = DataSource::Coo {
                path: path.clone(),
                test_path: self.test.clone(),
            };
        } else if self.test.is_some() {
            return Err(NortError::Config("--test needs --data".into()).into());
        }
        let flags = [
            ("solver.reg", &self.reg),
            ("solver.lambda", &self.lambda),
            ("solver.theta", &self.theta),
            ("solver.D", &self.d),
            ("solver.tau", &self.tau),
            ("solver.gamma1", &self.gamma1),
            ("solver.p", &self.p),
            ("solver.max_iters", &self.max_iters),
            ("solver.tol", &self.tol),
            ("solver.name", &self.solver),
            ("svd.tol", &self.svd_tol),
            ("svd.iters", &self.svd_iters),
            ("seed", &self.seed),
            ("data.noise_std", &self.noise_std),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)
                    .with_context(|| format!("--{}", flag_name(key)))?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| NortError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn flag_name(key: &str) -> String {
    let last = key.rsplit('.').next().unwrap_or(key);
    match key {
        "solver.name" => "solver".into(),
        "svd.tol" => "svd-tol".into(),
        "svd.iters" => "svd-iters".into(),
        _ => last.replace('_', "-"),
    }
}

#[derive(Args)]
struct CompleteArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Write the best estimate as a dense tensor file.
    #[arg(long)]
    save_estimate: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dense tensor file (DT3 format).
    #[arg(long)]
    estimate: PathBuf,
    /// COO file with the reference entries.
    #[arg(long)]
    reference: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Solvers to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "nort,snort,gdpan,pa-apg")]
    solvers: Vec<String>,
    /// Lambda grid for pa-apg, which always uses the nuclear norm.
    /// Defaults to the main grid.
    #[arg(long)]
    apg_lambda: Option<String>,
}

fn synth(args: &SynthArgs) -> Result<()> {
    let [i1, i2, i3] = args.dims[..] else {
        return Err(NortError::Config(format!(
            "--dims expects three extents, got {}",
            args.dims.len()
        ))
        .into());
    };
    let observed = match args.observed.as_str() {
        "log" => ObsRule::LogRule,
        v if v.contains('.') || v.contains('e') => ObsRule::Fraction(
            v.parse()
                .map_err(|_| NortError::Config(format!("--observed: cannot parse {v:?}")))?,
        ),
        v => ObsRule::Count(
            v.parse()
                .map_err(|_| NortError::Config(format!("--observed: cannot parse {v:?}")))?,
        ),
    };
    let spec = SynthSpec {
        dims: [i1, i2, i3],
        rank: args.rank,
        noise_std: args.noise_std,
        observed,
        train_fraction: args.train_fraction,
        seed: args.seed,
    };
    let data = synth_generate(&spec)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    save_coo(&data.train, args.out.join("train.coo"))?;
    save_coo(&data.val, args.out.join("val.coo"))?;
    save_coo(&data.test, args.out.join("test.coo"))?;
    save_dense(&data.truth, args.out.join("truth.dt3"))?;
    let summary = serde_json::json!({
        "dims": spec.dims,
        "train": data.train.nnz(),
        "val": data.val.nnz(),
        "test": data.test.nnz(),
        "out": args.out,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn complete(args: &CompleteArgs) -> Result<()> {
    let cfg = args.overrides.build()?;
    let report = match &args.save_estimate {
        Some(path) => {
            let (report, estimate) = run_experiment_with_estimate(&cfg)?;
            save_dense(&estimate.to_dense(), path)?;
            report
        }
        None => run_experiment(&cfg)?,
    };
    print_summary(&report);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let estimate = load_dense(&args.estimate)?;
    let reference = load_coo(&args.reference)?;
    let rmse = rmse_dense(&estimate, &reference)?;
    let out = serde_json::json!({ "rmse": rmse, "entries": reference.nnz() });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let base = args.overrides.build()?;
    let mut reports = Vec::new();
    for name in &args.solvers {
        let kind: SolverKind = name.parse()?;
        let mut cfg = base.clone();
        cfg.solver = kind;
        if kind == SolverKind::PaApg {
            cfg.set("solver.reg", "nn")?;
            if let Some(l) = &args.apg_lambda {
                cfg.set("solver.lambda", l)?;
            }
        }
        if let Some(dir) = &base.output_dir {
            cfg.output_dir = Some(dir.join(kind.name()));
        }
        let report = run_experiment(&cfg)?;
        print_summary(&report);
        reports.push(report);
    }
    let json = serde_json::to_string_pretty(&reports)?;
    if let Some(dir) = &base.output_dir {
        std::fs::write(dir.join("bench.json"), &json)
            .with_context(|| format!("writing {}", dir.join("bench.json").display()))?;
    }
    println!("{json}");
    Ok(())
}

/// One line per run on stderr, so stdout stays machine readable.
fn print_summary(r: &ExperimentReport) {
    let best = r.best_cell();
    eprintln!(
        "{:<7} {:<10} D={} lambda={} theta={} val_rmse={} test_rmse={} iters={} seconds={:.2}",
        r.solver,
        r.reg,
        r.d,
        best.map_or(f64::NAN, |c| c.lambda),
        best.map_or(f64::NAN, |c| c.theta),
        fmt_opt(best.and_then(|c| c.val_rmse)),
        fmt_opt(r.best_test_rmse),
        best.map_or(0, |c| c.iterations),
        r.seconds
    );
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<NortError>() {
        Some(NortError::Numerical { .. }) => 3,
        Some(
            NortError::Config(_)
            | NortError::Parse { .. }
            | NortError::Shape(_)
            | NortError::Range(_)
            | NortError::Domain(_),
        ) => 2,
        Some(NortError::Io(_)) | None => 1,
    }
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NORT_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            NortError::Config(format!(
                "NORT_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Complete(a) => complete(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
