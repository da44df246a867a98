//! Command-line front end.
//!
//! Every subcommand reads and/or rewrites one dataset file. Exit codes:
//! 0 on success, 1 on user error (bad flags or input files), 2 on internal
//! or backend failure.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::advisor::{recommend, AdvisorError, BillingMode, ParetoResult};
use crate::dataset::{
    extract_curve, format_timestamp, ingest_records, load_catalog, AppInput, BenchmarkRecord,
    Dataset, DatasetError, Provenance, VmCatalog, METHOD_CROSS_INPUT, METHOD_CROSS_VM,
};
use crate::executor::{CloudStub, Executor, ExecutorError, ReplayExecutor, Simulator, SyntheticModel};
use crate::optimizer::OptimizerConfig;
use crate::planner::{
    evaluate, execute_plan, plan, ExecuteOptions, PlanError, PlanOptions, ScenarioGrid,
};
use crate::predictor::{fit_scaling_factor, predict_cross_vm, PredictError, ScalingRules};
use crate::report::{
    dataset_rows, emit_plot, emit_table, pareto_rows, PlotKind, PlotSpec, ReportError,
};
use crate::BUNDLED_CATALOG;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

/// Environment variable naming the default output directory.
pub const HOME_ENV: &str = "HPCADVISOR_HOME";
const DEFAULT_OUT_DIR: &str = "hpcadvisor-out";

#[derive(Debug, Parser)]
#[command(
    name = "hpcadvisor",
    version,
    about = "Predict, cost and recommend HPC cloud VM configurations"
)]
pub struct Cli {
    /// JSON run configuration; explicit flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// VM catalog (JSON Lines). Defaults to the bundled HC/HBv2/HBv3 catalog.
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// Dataset file shared by all subcommands. Defaults to <out-dir>/dataset.jsonl.
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Output directory for plots and tables. Defaults to $HPCADVISOR_HOME or ./hpcadvisor-out.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Seed for all randomness (overrides the synthetic model's seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Billing granularity used for costs.
    #[arg(long, global = true, value_enum)]
    pub billing: Option<BillingArg>,
    /// RFC 3339 timestamp stamped on new records (default: $SOURCE_DATE_EPOCH, else now).
    #[arg(long, global = true)]
    pub timestamp: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BillingArg {
    PerMinute,
    Exact,
}

impl From<BillingArg> for BillingMode {
    fn from(b: BillingArg) -> Self {
        match b {
            BillingArg::PerMinute => BillingMode::PerMinute,
            BillingArg::Exact => BillingMode::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Simulate,
    Replay,
    CloudStub,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge benchmark record files into the dataset.
    Ingest {
        /// JSON Lines record files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Simulate every scenario of a grid with the synthetic model.
    Simulate(SimulateArgs),
    /// Plan which scenarios to run and which to predict; optionally execute the plan.
    Plan(PlanArgs),
    /// Fit the scaling factor between two VM types from the dataset.
    Fit(FitArgs),
    /// Write predicted records into the dataset.
    Predict {
        #[command(subcommand)]
        mode: PredictMode,
    },
    /// Print the Pareto front of time and cost for one input and plot it.
    Advise(InputArgs),
    /// Write plots and tables for one input.
    Report(ReportArgs),
    /// Compare predicted records against executed ground truth.
    Evaluate {
        /// Dataset holding ground-truth (measured or simulated) records.
        #[arg(long)]
        truth: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Grid description (JSON).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Synthetic model (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Maximum concurrent runs.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Grid description (JSON).
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Probe runs per non-baseline VM type (1 or 2).
    #[arg(long)]
    pub probes: Option<usize>,
    /// Baseline VM type (default: lexicographically first).
    #[arg(long)]
    pub baseline: Option<String>,
    /// Add one baseline run per extra input value and rescale predictions by it.
    #[arg(long)]
    pub calibrate_inputs: bool,
    /// Run the plan and write executed and predicted records.
    #[arg(long)]
    pub execute: bool,
    /// Execution backend used with --execute.
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Synthetic model for the simulate backend.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Fixture dataset for the replay backend.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Maximum concurrent runs.
    #[arg(long)]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Input parameter as name=value, e.g. cells=1e6.
    #[arg(long)]
    pub input: String,
    /// Application name (inferred from the dataset when unambiguous).
    #[arg(long)]
    pub app: Option<String>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// VM type whose executed curve is scaled.
    #[arg(long)]
    pub source: String,
    /// VM type with one or two executed probe points.
    #[arg(long)]
    pub target: String,
    #[command(flatten)]
    pub input: InputArgs,
}

#[derive(Debug, Subcommand)]
pub enum PredictMode {
    /// Predict a VM type's curve from another VM type's curve.
    Vm(FitArgs),
    /// Predict a VM type's curve at another input value.
    Input {
        /// VM type to predict.
        #[arg(long)]
        sku: String,
        /// Known input, name=value.
        #[arg(long)]
        from: String,
        /// Target input, name=value.
        #[arg(long)]
        to: String,
        /// Application name (inferred from the dataset when unambiguous).
        #[arg(long)]
        app: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Time,
    Cost,
    Pareto,
    Table,
    All,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub kind: ReportKind,
    #[command(flatten)]
    pub input: InputArgs,
}

/// Optional settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub catalog: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub grid: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub probes_per_sku: Option<usize>,
    pub baseline: Option<String>,
    pub billing: Option<BillingArg>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub scaling_rules: ScalingRules,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn user(message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_USER,
            message: message.to_string(),
        }
    }

    pub fn internal(message: impl fmt::Display) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::internal(e),
            _ => CliError::user(e),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::BaselineMissing { .. } | PlanError::ThreadPool(_) => CliError::internal(e),
            PlanError::Dataset(d) => d.into(),
            _ => CliError::user(e),
        }
    }
}

impl From<ExecutorError> for CliError {
    fn from(e: ExecutorError) -> Self {
        CliError::user(e)
    }
}

impl From<AdvisorError> for CliError {
    fn from(e: AdvisorError) -> Self {
        CliError::user(e)
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        CliError::user(e)
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Dataset(d) => d.into(),
            ReportError::Csv(_) => CliError::internal(e),
            _ => CliError::user(e),
        }
    }
}

/// Settings resolved from flags, the config file, and the environment.
struct Context {
    catalog: VmCatalog,
    dataset_path: PathBuf,
    out_dir: PathBuf,
    seed: Option<u64>,
    billing: BillingMode,
    timestamp: DateTime<Utc>,
    config: RunConfig,
}

impl Context {
    fn resolve(cli: &Cli) -> Result<Context, CliError> {
        let config = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::user(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let catalog = match cli.catalog.as_ref().or(config.catalog.as_ref()) {
            Some(path) => load_catalog(path).map_err(|e| match e {
                DatasetError::Io { .. } => CliError::user(e),
                e => CliError::from(e),
            })?,
            None => VmCatalog::from_reader(BUNDLED_CATALOG.as_bytes())?,
        };
        let out_dir = cli
            .out_dir
            .clone()
            .or_else(|| config.output_dir.clone())
            .or_else(|| std::env::var_os(HOME_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let dataset_path = cli
            .dataset
            .clone()
            .or_else(|| config.dataset.clone())
            .unwrap_or_else(|| out_dir.join("dataset.jsonl"));
        let billing = cli
            .billing
            .or(config.billing)
            .map(BillingMode::from)
            .unwrap_or_default();
        let timestamp = resolve_timestamp(cli.timestamp.as_deref())?;
        Ok(Context {
            catalog,
            dataset_path,
            out_dir,
            seed: cli.seed.or(config.seed),
            billing,
            timestamp,
            config,
        })
    }

    fn load_dataset(&self) -> Result<Dataset, CliError> {
        let (dataset, summary) = Dataset::load_or_default(&self.dataset_path)?;
        for (index, reason) in &summary.rejected {
            eprintln!(
                "warning: {} record {index} skipped: {reason}",
                self.dataset_path.display()
            );
        }
        Ok(dataset)
    }

    fn save_dataset(&self, dataset: &Dataset) -> Result<(), CliError> {
        dataset
            .save(&self.dataset_path)
            .map_err(CliError::internal)
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn parallelism(&self, flag: Option<usize>) -> Result<usize, CliError> {
        let p = flag.or(self.config.parallelism).unwrap_or(1);
        if p == 0 {
            return Err(CliError::user("--parallelism must be at least 1"));
        }
        Ok(p)
    }

    fn grid(&self, flag: &Option<PathBuf>) -> Result<ScenarioGrid, CliError> {
        let path = flag
            .as_ref()
            .or(self.config.grid.as_ref())
            .ok_or_else(|| CliError::user("a grid is required (--grid or config `grid`)"))?;
        Ok(ScenarioGrid::load(path)?)
    }

    fn model(&self, flag: &Option<PathBuf>) -> Result<SyntheticModel, CliError> {
        let path = flag
            .as_ref()
            .or(self.config.model.as_ref())
            .ok_or_else(|| CliError::user("a synthetic model is required (--model or config `model`)"))?;
        let mut model = SyntheticModel::load(path)?;
        if let Some(seed) = self.seed {
            model.seed = seed;
        }
        Ok(model)
    }

    fn execute_options(&self, parallelism: usize) -> ExecuteOptions {
        ExecuteOptions {
            parallelism,
            timestamp: self.timestamp,
            optimizer: OptimizerConfig::default(),
            scaling_rules: self.config.scaling_rules.clone(),
        }
    }
}

fn resolve_timestamp(flag: Option<&str>) -> Result<DateTime<Utc>, CliError> {
    if let Some(text) = flag {
        return DateTime::parse_from_rfc3339(text)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| CliError::user(format!("--timestamp `{text}`: {e}")));
    }
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        let secs: i64 = epoch
            .trim()
            .parse()
            .map_err(|_| CliError::user(format!("SOURCE_DATE_EPOCH `{epoch}` is not an integer")))?;
        return DateTime::from_timestamp(secs, 0)
            .ok_or_else(|| CliError::user("SOURCE_DATE_EPOCH out of range"));
    }
    Ok(Utc::now())
}

/// Parses `name=value`.
pub fn parse_param(text: &str) -> Result<(String, f64), CliError> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::user(format!("expected name=value, got `{text}`")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::user(format!("`{value}` is not a number")))?;
    if name.trim().is_empty() || !(value.is_finite() && value > 0.0) {
        return Err(CliError::user(format!("invalid input parameter `{text}`")));
    }
    Ok((name.trim().to_string(), value))
}

/// Builds an [`AppInput`], inferring the application from the dataset.
fn resolve_input(text: &str, app: Option<&str>, dataset: &Dataset) -> Result<AppInput, CliError> {
    let (param, value) = parse_param(text)?;
    let app = match app {
        Some(a) => a.to_string(),
        None => {
            let apps: BTreeSet<String> = dataset
                .records()
                .filter(|r| r.scenario.input.param_name == param)
                .map(|r| r.scenario.input.app_name.clone())
                .collect();
            match apps.len() {
                1 => apps.into_iter().next().expect("one element"),
                0 => {
                    return Err(CliError::user(format!(
                        "no data for parameter `{param}` in the dataset"
                    )))
                }
                _ => {
                    return Err(CliError::user(format!(
                        "parameter `{param}` is used by several applications; pass --app"
                    )))
                }
            }
        }
    };
    Ok(AppInput::new(&app, &param, value))
}

/// The single processes-per-VM value with executed data for a VM type and input.
fn executed_procs(dataset: &Dataset, sku: &str, input: &AppInput) -> Result<u32, CliError> {
    let procs: BTreeSet<u32> = dataset
        .records()
        .filter(|r| {
            r.provenance.is_executed() && r.scenario.sku_name == sku && r.scenario.input == *input
        })
        .map(|r| r.scenario.procs_per_vm)
        .collect();
    match procs.len() {
        0 => Err(CliError::user(format!("no executed data for {sku} at {input}"))),
        1 => Ok(*procs.iter().next().expect("one element")),
        _ => Err(CliError::user(format!(
            "{sku} has executed data at several processes-per-VM values for {input}"
        ))),
    }
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::resolve(cli)?;
    match &cli.command {
        Command::Ingest { files } => cmd_ingest(&ctx, files),
        Command::Simulate(args) => cmd_simulate(&ctx, args),
        Command::Plan(args) => cmd_plan(&ctx, args),
        Command::Fit(args) => cmd_fit(&ctx, args),
        Command::Predict { mode } => cmd_predict(&ctx, mode),
        Command::Advise(args) => cmd_advise(&ctx, args),
        Command::Report(args) => cmd_report(&ctx, args),
        Command::Evaluate { truth } => cmd_evaluate(&ctx, truth),
    }
}

fn cmd_ingest(ctx: &Context, files: &[PathBuf]) -> Result<(), CliError> {
    let mut dataset = ctx.load_dataset()?;
    for file in files {
        let (merged, summary) = ingest_records(file, dataset).map_err(|e| match e {
            DatasetError::Io { .. } => CliError::user(e),
            e => CliError::from(e),
        })?;
        dataset = merged;
        println!(
            "{}: {} accepted ({} replaced), {} rejected",
            file.display(),
            summary.accepted,
            summary.replaced,
            summary.rejected.len()
        );
        for (index, reason) in &summary.rejected {
            eprintln!("warning: record {index} rejected: {reason}");
        }
    }
    ctx.save_dataset(&dataset)?;
    println!("dataset {}: {} records", ctx.dataset_path.display(), dataset.len());
    Ok(())
}

fn cmd_simulate(ctx: &Context, args: &SimulateArgs) -> Result<(), CliError> {
    let grid = ctx.grid(&args.grid)?;
    let simulator = Simulator::new(ctx.model(&args.model)?)?;
    let scenarios = grid.scenarios(&ctx.catalog)?;
    let parallelism = ctx.parallelism(args.parallelism)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(CliError::internal)?;
    let outcomes: Vec<_> = pool.install(|| {
        use rayon::prelude::*;
        scenarios
            .par_iter()
            .map(|s| simulator.run(s, &ctx.catalog))
            .collect()
    });
    let mut dataset = ctx.load_dataset()?;
    let mut failed = 0;
    for outcome in outcomes {
        if !outcome.is_ok() {
            failed += 1;
            eprintln!("warning: {} failed: {}", outcome.scenario, outcome.detail);
            continue;
        }
        dataset.insert(BenchmarkRecord::executed(
            outcome.scenario,
            outcome.exec_time_s,
            Provenance::Simulated,
            ctx.timestamp,
        ))?;
    }
    ctx.save_dataset(&dataset)?;
    println!(
        "simulated {} / {} scenarios ({} failed); dataset {} now holds {} records",
        scenarios.len() - failed,
        scenarios.len(),
        failed,
        ctx.dataset_path.display(),
        dataset.len()
    );
    if failed == scenarios.len() {
        return Err(CliError::internal("every simulated scenario failed"));
    }
    Ok(())
}

fn cmd_plan(ctx: &Context, args: &PlanArgs) -> Result<(), CliError> {
    let grid = ctx.grid(&args.grid)?;
    let options = PlanOptions {
        probes_per_sku: args.probes.or(ctx.config.probes_per_sku).unwrap_or(2),
        baseline: args.baseline.clone().or_else(|| ctx.config.baseline.clone()),
        calibrate_inputs: args.calibrate_inputs,
    };
    let plan = plan(&grid, &ctx.catalog, &options)?;
    println!("{plan}");
    if !args.execute {
        return Ok(());
    }

    let backend = args.backend.or(ctx.config.backend).unwrap_or(Backend::Simulate);
    let executor: Box<dyn Executor> = match backend {
        Backend::Simulate => Box::new(Simulator::new(ctx.model(&args.model)?)?),
        Backend::Replay => {
            let path = args
                .replay
                .as_ref()
                .or(ctx.config.replay.as_ref())
                .ok_or_else(|| CliError::user("the replay backend needs --replay <dataset>"))?;
            Box::new(ReplayExecutor::load(path)?)
        }
        Backend::CloudStub => Box::new(CloudStub),
    };
    let parallelism = ctx.parallelism(args.parallelism)?;
    let dataset = ctx.load_dataset()?;
    let report = match execute_plan(
        &plan,
        executor.as_ref(),
        &ctx.catalog,
        dataset,
        &ctx.execute_options(parallelism),
    ) {
        Ok(r) => r,
        Err(e @ PlanError::BaselineMissing { .. }) => {
            return Err(CliError::internal(format!("{}: {e}", executor.name())))
        }
        Err(e) => return Err(e.into()),
    };
    for failure in &report.failures {
        eprintln!("warning: {}: {}", failure.scenario, failure.detail);
    }
    for (sku, fit) in &report.fits {
        println!(
            "fit {sku}: factor {:.6} residual {:.6e} ({} iterations{})",
            fit.factor,
            fit.residual,
            fit.iterations,
            if fit.converged { "" } else { ", not converged" }
        );
    }
    ctx.save_dataset(&report.dataset)?;
    println!(
        "ran {} scenarios with the {} backend, predicted {}; dataset {} now holds {} records",
        report.executed_ok,
        executor.name(),
        report.predicted_ok,
        ctx.dataset_path.display(),
        report.dataset.len()
    );
    Ok(())
}

fn fit_from_dataset(
    dataset: &Dataset,
    args: &FitArgs,
) -> Result<(crate::dataset::ScalingCurve, crate::predictor::ScalingFit, u32), CliError> {
    let input = resolve_input(&args.input.input, args.input.app.as_deref(), dataset)?;
    let source_procs = executed_procs(dataset, &args.source, &input)?;
    let target_procs = executed_procs(dataset, &args.target, &input)?;
    let source = extract_curve(dataset, &args.source, &input, source_procs, &Provenance::EXECUTED)?;
    let target = extract_curve(dataset, &args.target, &input, target_procs, &Provenance::EXECUTED)?;
    let fit = fit_scaling_factor(&source, target.points(), &OptimizerConfig::default())?;
    Ok((source, fit, target_procs))
}

fn cmd_fit(ctx: &Context, args: &FitArgs) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let (source, fit, _) = fit_from_dataset(&dataset, args)?;
    println!(
        "{} -> {} at {}: factor {:.6}, residual {:.6e}, {} iterations, {}",
        args.source,
        args.target,
        source.input,
        fit.factor,
        fit.residual,
        fit.iterations,
        if fit.converged { "converged" } else { "NOT converged" }
    );
    Ok(())
}

fn cmd_predict(ctx: &Context, mode: &PredictMode) -> Result<(), CliError> {
    let mut dataset = ctx.load_dataset()?;
    let records = match mode {
        PredictMode::Vm(args) => {
            let (source, fit, target_procs) = fit_from_dataset(&dataset, args)?;
            let mut curve = predict_cross_vm(&source, &fit, &args.target)?;
            curve.procs_per_vm = target_procs;
            println!("factor {:.6} applied to {} points of {}", fit.factor, curve.points().len(), args.source);
            curve.to_predicted_records(METHOD_CROSS_VM, ctx.timestamp)
        }
        PredictMode::Input { sku, from, to, app } => {
            let from = resolve_input(from, app.as_deref(), &dataset)?;
            let (to_param, to_value) = parse_param(to)?;
            let to = AppInput::new(&from.app_name, &to_param, to_value);
            let procs: BTreeSet<u32> = dataset
                .records()
                .filter(|r| r.scenario.sku_name == *sku && r.scenario.input == from)
                .map(|r| r.scenario.procs_per_vm)
                .collect();
            let mut out = Vec::new();
            if procs.is_empty() {
                return Err(CliError::user(format!("no data for {sku} at {from}")));
            }
            for p in procs {
                let curve = extract_curve(&dataset, sku, &from, p, &Provenance::ALL)?;
                let predicted = ctx.config.scaling_rules.predict_cross_input(&curve, &to)?;
                out.extend(predicted.to_predicted_records(METHOD_CROSS_INPUT, ctx.timestamp));
            }
            out
        }
    };
    let count = records.len();
    for r in records {
        dataset.insert(r)?;
    }
    ctx.save_dataset(&dataset)?;
    println!("wrote {count} predicted records to {}", ctx.dataset_path.display());
    Ok(())
}

fn print_pareto(result: &ParetoResult) {
    let insights = result.insights();
    println!(
        "{:<8} {:>6} {:>6} {:>14} {:>12} {:<10} note",
        "vm", "n_vms", "ppn", "time_s", "cost_usd", "origin"
    );
    for (i, p) in result.front.iter().enumerate() {
        let mut notes = Vec::new();
        if i == insights.fastest {
            notes.push("fastest");
        }
        if i == insights.cheapest {
            notes.push("cheapest");
        }
        if i == insights.balanced {
            notes.push("best time*cost");
        }
        println!(
            "{:<8} {:>6} {:>6} {:>14.3} {:>12.4} {:<10} {}",
            p.scenario.sku_name,
            p.scenario.n_vms,
            p.scenario.procs_per_vm,
            p.exec_time_s,
            p.cost,
            p.provenance,
            notes.join(", ")
        );
    }
    println!(
        "{} configurations on the Pareto front, {} dominated",
        result.front.len(),
        result.dominated.len()
    );
}

fn cmd_advise(ctx: &Context, args: &InputArgs) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let input = resolve_input(&args.input, args.app.as_deref(), &dataset)?;
    let result = recommend(&dataset, &ctx.catalog, &input, ctx.billing)?;
    println!("Pareto front for {input}");
    print_pareto(&result);
    let plot = ctx.out_path("pareto.svg");
    let table = ctx.out_path("pareto.csv");
    emit_plot(&PlotSpec::pareto(&result, &format!("Time vs cost ({input})")), &plot)?;
    emit_table(&pareto_rows(&result), &table)?;
    println!("wrote {} and {}", plot.display(), table.display());
    Ok(())
}

fn cmd_report(ctx: &Context, args: &ReportArgs) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let input = resolve_input(&args.input.input, args.input.app.as_deref(), &dataset)?;
    let want = |k: ReportKind| args.kind == k || args.kind == ReportKind::All;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut emit = |kind: PlotKind, spec: PlotSpec| -> Result<(), CliError> {
        let path = ctx.out_path(&format!("{}.svg", kind.file_stem()));
        emit_plot(&spec, &path)?;
        written.push(path);
        Ok(())
    };
    if want(ReportKind::Time) {
        emit(PlotKind::TimeVsVms, PlotSpec::time_vs_vms(&dataset, &input)?)?;
    }
    if want(ReportKind::Cost) {
        emit(
            PlotKind::CostVsVms,
            PlotSpec::cost_vs_vms(&dataset, &ctx.catalog, &input, ctx.billing)?,
        )?;
    }
    let pareto = if want(ReportKind::Pareto) || want(ReportKind::Table) {
        Some(recommend(&dataset, &ctx.catalog, &input, ctx.billing)?)
    } else {
        None
    };
    if let (true, Some(result)) = (want(ReportKind::Pareto), &pareto) {
        emit(PlotKind::Pareto, PlotSpec::pareto(result, &format!("Time vs cost ({input})")))?;
    }
    if let (true, Some(result)) = (want(ReportKind::Table), &pareto) {
        let path = ctx.out_path("pareto.csv");
        emit_table(&pareto_rows(result), &path)?;
        written.push(path);
        let path = ctx.out_path("dataset.csv");
        emit_table(&dataset_rows(&dataset, &ctx.catalog, ctx.billing)?, &path)?;
        written.push(path);
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_evaluate(ctx: &Context, truth: &Path) -> Result<(), CliError> {
    let dataset = ctx.load_dataset()?;
    let (truth, _) = ingest_records(truth, Dataset::new()).map_err(|e| match e {
        DatasetError::Io { .. } => CliError::user(e),
        e => CliError::from(e),
    })?;
    let report = evaluate(&dataset, &truth)?;
    println!("{report}");
    let mut worst: Vec<_> = report.entries.iter().collect();
    worst.sort_by(|a, b| b.ape.total_cmp(&a.ape).then(a.scenario.cmp(&b.scenario)));
    for e in worst.iter().take(5) {
        println!(
            "  {}: predicted {:.3} s, actual {:.3} s, APE {:.3}%",
            e.scenario, e.predicted, e.actual, e.ape
        );
    }
    Ok(())
}

/// Timestamp format used in dataset files, exposed for tests and tooling.
pub fn timestamp_string(ts: &DateTime<Utc>) -> String {
    format_timestamp(ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_parsing() {
        assert_eq!(parse_param("cells=1e6").unwrap(), ("cells".into(), 1e6));
        assert_eq!(parse_param(" atoms = 32000").unwrap(), ("atoms".into(), 32000.0));
        assert!(parse_param("cells").is_err());
        assert!(parse_param("cells=abc").is_err());
        assert!(parse_param("cells=-1").is_err());
        assert!(parse_param("=4").is_err());
    }

    #[test]
    fn timestamp_flag() {
        let t = resolve_timestamp(Some("2024-01-02T03:04:05Z")).unwrap();
        assert_eq!(timestamp_string(&t), "2024-01-02T03:04:05Z");
        assert!(resolve_timestamp(Some("yesterday")).is_err());
    }

    #[test]
    fn input_inference() {
        let ds = Dataset::from_records(vec![BenchmarkRecord::executed(
            crate::dataset::Scenario::new("HC", 1, 44, AppInput::new("openfoam", "cells", 1e6)),
            10.0,
            Provenance::Measured,
            DateTime::UNIX_EPOCH,
        )])
        .unwrap();
        let i = resolve_input("cells=2e6", None, &ds).unwrap();
        assert_eq!(i, AppInput::new("openfoam", "cells", 2e6));
        assert!(resolve_input("atoms=2e6", None, &ds).is_err());
        let i = resolve_input("atoms=2e6", Some("lammps"), &ds).unwrap();
        assert_eq!(i.app_name, "lammps");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 3, "parallelism": 2}"#).is_ok());
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 3}"#).is_err());
    }
}
