//! Scenario-reduction planning.
//!
//! A plan runs the baseline VM type at every node count and only one or two
//! probe node counts on every other VM type, all at the first input value.
//! The rest of the grid is predicted: other VM types by a fitted scaling
//! factor against the baseline curve, other input values by input-ratio
//! multiplication of each VM type's base curve.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    extract_curve, AppInput, BenchmarkRecord, Dataset, DatasetError, Provenance, Scenario,
    ScalingCurve, VmCatalog, METHOD_CROSS_INPUT, METHOD_CROSS_VM,
};
use crate::executor::Executor;
use crate::optimizer::OptimizerConfig;
use crate::predictor::{
    fit_scaling_factor, interpolate, predict_cross_vm, Extrapolation, PredictError, ScalingFit,
    ScalingRules,
};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("probes per VM type must be 1 or 2, got {0}")]
    InvalidProbeCount(usize),
    #[error("baseline VM type `{0}` is not part of the grid")]
    UnknownBaseline(String),
    #[error("parallelism must be at least 1")]
    InvalidParallelism,
    #[error("baseline {sku} has no successful runs to predict from ({detail})")]
    BaselineMissing { sku: String, detail: String },
    #[error("fitting VM type {sku} failed: {source}")]
    FitFailed {
        sku: String,
        #[source]
        source: PredictError,
    },
    #[error("scenario {0} has no ground truth")]
    MissingGroundTruth(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Processes per VM used for every scenario of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProcsPolicy {
    /// One process per core of the VM type.
    #[default]
    AllCores,
    Fixed(u32),
}

impl Serialize for ProcsPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ProcsPolicy::AllCores => s.serialize_str("all-cores"),
            ProcsPolicy::Fixed(n) => s.serialize_u32(*n),
        }
    }
}

impl<'de> Deserialize<'de> for ProcsPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u32),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(ProcsPolicy::Fixed(n)),
            Raw::Name(s) if s == "all-cores" => Ok(ProcsPolicy::AllCores),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "procs_per_vm must be \"all-cores\" or an integer, got `{s}`"
            ))),
        }
    }
}

/// The full configuration space: VM types × node counts × input values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGrid {
    pub sku_names: Vec<String>,
    pub node_counts: Vec<u32>,
    pub inputs: Vec<AppInput>,
    pub procs_per_vm: ProcsPolicy,
}

/// On-disk grid description (a single JSON object).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFile {
    pub app_name: String,
    pub param_name: String,
    pub param_values: Vec<f64>,
    pub skus: Vec<String>,
    pub node_counts: Vec<u32>,
    #[serde(default)]
    pub procs_per_vm: ProcsPolicy,
}

impl From<GridFile> for ScenarioGrid {
    fn from(g: GridFile) -> Self {
        ScenarioGrid {
            sku_names: g.skus,
            node_counts: g.node_counts,
            inputs: g
                .param_values
                .iter()
                .map(|&v| AppInput::new(&g.app_name, &g.param_name, v))
                .collect(),
            procs_per_vm: g.procs_per_vm,
        }
    }
}

impl ScenarioGrid {
    pub fn load(path: &std::path::Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PlanError::InvalidGrid(format!("{}: {e}", path.display())))?;
        let file: GridFile = serde_json::from_str(&text)
            .map_err(|e| PlanError::InvalidGrid(format!("{}: {e}", path.display())))?;
        Ok(file.into())
    }

    pub fn validate(&self, catalog: &VmCatalog) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidGrid(m));
        if self.sku_names.is_empty() || self.node_counts.is_empty() || self.inputs.is_empty() {
            return bad("every axis needs at least one value".into());
        }
        if self.node_counts[0] == 0 || self.node_counts.windows(2).any(|w| w[0] >= w[1]) {
            return bad("node counts must be positive and strictly increasing".into());
        }
        let unique: BTreeSet<&String> = self.sku_names.iter().collect();
        if unique.len() != self.sku_names.len() {
            return bad("duplicate VM type".into());
        }
        let first = &self.inputs[0];
        if self.inputs.iter().any(|i| !i.same_parameter(first)) {
            return bad("all inputs must share one application parameter".into());
        }
        let values: BTreeSet<&AppInput> = self.inputs.iter().collect();
        if values.len() != self.inputs.len() {
            return bad("duplicate input value".into());
        }
        for input in &self.inputs {
            input.validate()?;
        }
        for sku in &self.sku_names {
            self.procs_for(sku, catalog)?;
        }
        Ok(())
    }

    pub fn procs_for(&self, sku_name: &str, catalog: &VmCatalog) -> Result<u32, PlanError> {
        let sku = catalog
            .get(sku_name)
            .ok_or_else(|| PlanError::InvalidGrid(format!("VM type `{sku_name}` not in catalog")))?;
        match self.procs_per_vm {
            ProcsPolicy::AllCores => Ok(sku.cores_per_vm),
            ProcsPolicy::Fixed(0) => Err(PlanError::InvalidGrid("procs_per_vm must be positive".into())),
            ProcsPolicy::Fixed(n) if n > sku.cores_per_vm => Err(PlanError::InvalidGrid(format!(
                "{n} processes per VM exceed the {} cores of {sku_name}",
                sku.cores_per_vm
            ))),
            ProcsPolicy::Fixed(n) => Ok(n),
        }
    }

    pub fn len(&self) -> usize {
        self.sku_names.len() * self.node_counts.len() * self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn base_input(&self) -> &AppInput {
        &self.inputs[0]
    }

    /// Every scenario of the grid in canonical order.
    pub fn scenarios(&self, catalog: &VmCatalog) -> Result<Vec<Scenario>, PlanError> {
        self.validate(catalog)?;
        let mut out = Vec::with_capacity(self.len());
        for sku in &self.sku_names {
            let procs = self.procs_for(sku, catalog)?;
            for input in &self.inputs {
                for &n in &self.node_counts {
                    out.push(Scenario::new(sku, n, procs, input.clone()));
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanOptions {
    pub probes_per_sku: usize,
    /// Defaults to the lexicographically first VM type.
    pub baseline: Option<String>,
    /// Run the baseline once per extra input value (at the largest node
    /// count) and rescale that input's predictions by measured / predicted.
    pub calibrate_inputs: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            probes_per_sku: 2,
            baseline: None,
            calibrate_inputs: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedPrediction {
    pub scenario: Scenario,
    pub method: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPlan {
    pub baseline_sku: String,
    pub base_input: AppInput,
    pub executed: Vec<Scenario>,
    pub predicted: Vec<PlannedPrediction>,
    pub probe_counts: BTreeMap<String, usize>,
    pub probe_nodes: Vec<u32>,
    /// Calibration runs; also listed in `executed`.
    pub calibration: Vec<Scenario>,
}

impl ScenarioPlan {
    pub fn total(&self) -> usize {
        self.executed.len() + self.predicted.len()
    }

    pub fn reduction_percent(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        self.predicted.len() as f64 / self.total() as f64 * 100.0
    }

    pub fn count_method(&self, method: &str) -> usize {
        self.predicted.iter().filter(|p| p.method == method).count()
    }
}

impl fmt::Display for ScenarioPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "executed {} / {} ({:.1}% reduction)",
            self.executed.len(),
            self.total(),
            self.reduction_percent()
        )?;
        writeln!(f, "baseline: {} at {}", self.baseline_sku, self.base_input)?;
        let nodes: Vec<String> = self.probe_nodes.iter().map(u32::to_string).collect();
        for (sku, count) in &self.probe_counts {
            writeln!(f, "probes: {sku} x{count} at n = {}", nodes.join(", "))?;
        }
        if !self.calibration.is_empty() {
            writeln!(f, "calibration runs: {}", self.calibration.len())?;
        }
        write!(
            f,
            "predicted: {} {}, {} {}",
            self.count_method(METHOD_CROSS_VM),
            METHOD_CROSS_VM,
            self.count_method(METHOD_CROSS_INPUT),
            METHOD_CROSS_INPUT
        )
    }
}

/// Partitions the grid into executed and predicted scenarios.
pub fn plan(
    grid: &ScenarioGrid,
    catalog: &VmCatalog,
    options: &PlanOptions,
) -> Result<ScenarioPlan, PlanError> {
    if !(1..=2).contains(&options.probes_per_sku) {
        return Err(PlanError::InvalidProbeCount(options.probes_per_sku));
    }
    let all = grid.scenarios(catalog)?;
    let baseline = match &options.baseline {
        Some(b) if grid.sku_names.contains(b) => b.clone(),
        Some(b) => return Err(PlanError::UnknownBaseline(b.clone())),
        None => grid.sku_names.iter().min().cloned().expect("validated non-empty"),
    };
    let base_input = grid.base_input().clone();
    let smallest = grid.node_counts[0];
    let largest = *grid.node_counts.last().expect("validated non-empty");
    let mut probe_nodes = if options.probes_per_sku == 2 {
        vec![smallest, largest]
    } else {
        vec![largest]
    };
    probe_nodes.dedup();

    let calibration: Vec<Scenario> = if options.calibrate_inputs {
        let procs = grid.procs_for(&baseline, catalog)?;
        grid.inputs[1..]
            .iter()
            .map(|i| Scenario::new(&baseline, largest, procs, i.clone()))
            .collect()
    } else {
        Vec::new()
    };

    let mut executed = Vec::new();
    let mut predicted = Vec::new();
    for s in all {
        let run = if s.input != base_input {
            calibration.contains(&s)
        } else {
            s.sku_name == baseline || probe_nodes.contains(&s.n_vms)
        };
        if run {
            executed.push(s);
        } else {
            let method = if s.input == base_input {
                METHOD_CROSS_VM
            } else {
                METHOD_CROSS_INPUT
            };
            predicted.push(PlannedPrediction { scenario: s, method });
        }
    }
    let probe_counts = grid
        .sku_names
        .iter()
        .filter(|s| **s != baseline)
        .map(|s| (s.clone(), probe_nodes.len()))
        .collect();
    Ok(ScenarioPlan {
        baseline_sku: baseline,
        base_input,
        executed,
        predicted,
        probe_counts,
        probe_nodes,
        calibration,
    })
}

#[derive(Debug, Clone)]
pub struct ExecuteOptions {
    pub parallelism: usize,
    /// Timestamp stamped on every record produced by this execution.
    pub timestamp: DateTime<Utc>,
    pub optimizer: OptimizerConfig,
    pub scaling_rules: ScalingRules,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        ExecuteOptions {
            parallelism: 1,
            timestamp: Utc::now(),
            optimizer: OptimizerConfig::default(),
            scaling_rules: ScalingRules::default(),
        }
    }
}

/// A scenario that could not be executed or predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFailure {
    pub scenario: Scenario,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ExecutionReport {
    pub dataset: Dataset,
    /// Failures in canonical scenario order.
    pub failures: Vec<ScenarioFailure>,
    pub fits: BTreeMap<String, ScalingFit>,
    pub executed_ok: usize,
    pub predicted_ok: usize,
}

/// Runs the plan's executed scenarios, then fills in every predicted
/// scenario, merging the results into `dataset`.
///
/// Executed scenarios are dispatched on up to `options.parallelism` threads.
/// The output does not depend on the degree of parallelism.
pub fn execute_plan(
    plan: &ScenarioPlan,
    executor: &dyn Executor,
    catalog: &VmCatalog,
    mut dataset: Dataset,
    options: &ExecuteOptions,
) -> Result<ExecutionReport, PlanError> {
    if options.parallelism == 0 {
        return Err(PlanError::InvalidParallelism);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| PlanError::ThreadPool(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| {
        plan.executed
            .par_iter()
            .map(|s| executor.run(s, catalog))
            .collect()
    });

    let stamp = options.timestamp;
    let mut failures = Vec::new();
    let mut fresh = Dataset::new();
    for outcome in outcomes {
        if !outcome.is_ok() {
            failures.push(ScenarioFailure {
                scenario: outcome.scenario,
                detail: outcome.detail,
            });
            continue;
        }
        let record = BenchmarkRecord::executed(
            outcome.scenario.clone(),
            outcome.exec_time_s,
            executor.provenance(),
            stamp,
        );
        if let Err(e) = fresh.insert(record) {
            failures.push(ScenarioFailure {
                scenario: outcome.scenario,
                detail: e.to_string(),
            });
        }
    }
    let executed_ok = fresh.len();

    let mut predictions = Dataset::new();
    let mut fits = BTreeMap::new();
    if !plan.predicted.is_empty() {
        predict_missing(plan, catalog, &fresh, &mut predictions, &mut fits, &mut failures, options)?;
    }
    let predicted_ok = predictions.len();

    dataset.merge(fresh);
    dataset.merge(predictions);
    failures.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.detail.cmp(&b.detail)));
    Ok(ExecutionReport {
        dataset,
        failures,
        fits,
        executed_ok,
        predicted_ok,
    })
}

fn predict_missing(
    plan: &ScenarioPlan,
    catalog: &VmCatalog,
    fresh: &Dataset,
    predictions: &mut Dataset,
    fits: &mut BTreeMap<String, ScalingFit>,
    failures: &mut Vec<ScenarioFailure>,
    options: &ExecuteOptions,
) -> Result<(), PlanError> {
    let stamp = options.timestamp;
    let procs_of = |sku: &str| -> Result<u32, PlanError> {
        plan.executed
            .iter()
            .chain(plan.predicted.iter().map(|p| &p.scenario))
            .find(|s| s.sku_name == sku)
            .map(|s| s.procs_per_vm)
            .ok_or_else(|| PlanError::InvalidGrid(format!("no scenarios for {sku}")))
            .and_then(|p| {
                catalog.get(sku).map(|_| p).ok_or_else(|| {
                    PlanError::InvalidGrid(format!("VM type `{sku}` not in catalog"))
                })
            })
    };
    let base_input = &plan.base_input;
    let baseline_procs = procs_of(&plan.baseline_sku)?;
    let baseline_curve = extract_curve(
        fresh,
        &plan.baseline_sku,
        base_input,
        baseline_procs,
        &Provenance::EXECUTED,
    )
    .map_err(|_| PlanError::BaselineMissing {
        sku: plan.baseline_sku.clone(),
        detail: failures
            .iter()
            .find(|f| f.scenario.sku_name == plan.baseline_sku)
            .map_or_else(|| "no runs planned".to_string(), |f| f.detail.clone()),
    })?;

    let mut unpredicted = |scenario: &Scenario, detail: String| {
        failures.push(ScenarioFailure {
            scenario: scenario.clone(),
            detail,
        })
    };

    // Cross-VM-type: fit each probed VM type against the baseline curve.
    let mut base_curves: BTreeMap<String, ScalingCurve> = BTreeMap::new();
    base_curves.insert(plan.baseline_sku.clone(), baseline_curve.clone());
    for sku in plan.probe_counts.keys() {
        let procs = procs_of(sku)?;
        let probes: Vec<(u32, f64)> = match extract_curve(fresh, sku, base_input, procs, &Provenance::EXECUTED) {
            Ok(c) => c.points().to_vec(),
            Err(_) => Vec::new(),
        };
        let fit = fit_scaling_factor(&baseline_curve, &probes, &options.optimizer).map_err(|source| {
            PlanError::FitFailed {
                sku: sku.clone(),
                source,
            }
        })?;
        let mut predicted_curve =
            predict_cross_vm(&baseline_curve, &fit, sku).map_err(|source| PlanError::FitFailed {
                sku: sku.clone(),
                source,
            })?;
        predicted_curve.procs_per_vm = procs;
        fits.insert(sku.clone(), fit);

        let mut combined: Vec<(u32, f64)> = probes.clone();
        // planned cross-VM scenarios, plus probes whose run failed
        let failed_probes = plan
            .executed
            .iter()
            .filter(|s| s.sku_name == *sku && s.input == *base_input && fresh.executed(s).is_none());
        let targets = plan
            .predicted
            .iter()
            .filter(|p| p.method == METHOD_CROSS_VM && p.scenario.sku_name == *sku)
            .map(|p| &p.scenario)
            .chain(failed_probes);
        for scenario in targets {
            match interpolate(&predicted_curve, scenario.n_vms, Extrapolation::Forbid) {
                Ok(t) => {
                    predictions.insert(BenchmarkRecord::predicted(
                        scenario.clone(),
                        t,
                        METHOD_CROSS_VM,
                        stamp,
                    ))?;
                    if !combined.iter().any(|c| c.0 == scenario.n_vms) {
                        combined.push((scenario.n_vms, t));
                    }
                }
                Err(e) => unpredicted(scenario, e.to_string()),
            }
        }
        base_curves.insert(
            sku.clone(),
            ScalingCurve::new(sku, base_input.clone(), procs, combined)?,
        );
    }

    // Calibration ratios per extra input, from the baseline.
    let mut calibration: BTreeMap<AppInput, f64> = BTreeMap::new();
    for s in &plan.calibration {
        let Some(measured) = fresh.executed(s) else {
            continue;
        };
        let predicted = options
            .scaling_rules
            .predict_cross_input(&baseline_curve, &s.input)
            .and_then(|c| interpolate(&c, s.n_vms, Extrapolation::Forbid));
        match predicted {
            Ok(p) => {
                calibration.insert(s.input.clone(), measured.exec_time_s / p);
            }
            Err(e) => unpredicted(s, format!("calibration skipped: {e}")),
        }
    }

    // Cross-input: scale each VM type's base curve to the other inputs.
    for p in plan.predicted.iter().filter(|p| p.method == METHOD_CROSS_INPUT) {
        let s = &p.scenario;
        let Some(curve) = base_curves.get(&s.sku_name) else {
            unpredicted(s, format!("no base curve for {}", s.sku_name));
            continue;
        };
        let time = options
            .scaling_rules
            .predict_cross_input(curve, &s.input)
            .and_then(|c| interpolate(&c, s.n_vms, Extrapolation::Forbid));
        match time {
            Ok(t) => {
                let t = t * calibration.get(&s.input).copied().unwrap_or(1.0);
                predictions.insert(BenchmarkRecord::predicted(s.clone(), t, METHOD_CROSS_INPUT, stamp))?;
            }
            Err(e) => unpredicted(s, e.to_string()),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEntry {
    pub scenario: Scenario,
    pub actual: f64,
    pub predicted: f64,
    /// Absolute percentage error.
    pub ape: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionReport {
    pub entries: Vec<PredictionEntry>,
    /// Mean absolute percentage error, in percent.
    pub mape: f64,
    pub max_ape: f64,
}

impl PredictionReport {
    pub fn count(&self) -> usize {
        self.entries.len()
    }
}

impl fmt::Display for PredictionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} predicted scenarios: MAPE {:.3}%, max APE {:.3}%",
            self.count(),
            self.mape,
            self.max_ape
        )
    }
}

/// Compares every predicted record with the executed record of the same
/// scenario in `ground_truth`.
pub fn evaluate(predicted: &Dataset, ground_truth: &Dataset) -> Result<PredictionReport, PlanError> {
    let mut entries = Vec::new();
    for record in predicted.records().filter(|r| r.provenance == Provenance::Predicted) {
        let truth = ground_truth
            .executed(&record.scenario)
            .ok_or_else(|| PlanError::MissingGroundTruth(record.scenario.to_string()))?;
        let ape = (record.exec_time_s - truth.exec_time_s).abs() / truth.exec_time_s * 100.0;
        entries.push(PredictionEntry {
            scenario: record.scenario.clone(),
            actual: truth.exec_time_s,
            predicted: record.exec_time_s,
            ape,
        });
    }
    let mape = if entries.is_empty() {
        0.0
    } else {
        entries.iter().map(|e| e.ape).sum::<f64>() / entries.len() as f64
    };
    let max_ape = entries.iter().map(|e| e.ape).fold(0.0, f64::max);
    Ok(PredictionReport {
        entries,
        mape,
        max_ape,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::VmSku;
    use proptest::prelude::*;

    fn catalog() -> VmCatalog {
        VmCatalog::new(vec![
            VmSku::new("HC", 44, 3.168, "hc"),
            VmSku::new("HBv2", 120, 3.6, "hb"),
            VmSku::new("HBv3", 120, 3.6, "hb"),
        ])
        .unwrap()
    }

    fn grid(skus: &[&str], nodes: &[u32], values: &[f64]) -> ScenarioGrid {
        ScenarioGrid {
            sku_names: skus.iter().map(|s| s.to_string()).collect(),
            node_counts: nodes.to_vec(),
            inputs: values
                .iter()
                .map(|&v| AppInput::new("openfoam", "cells", v))
                .collect(),
            procs_per_vm: ProcsPolicy::AllCores,
        }
    }

    fn paper_grid() -> ScenarioGrid {
        grid(&["HC", "HBv2", "HBv3"], &[1, 2, 4, 8, 16], &[1e6, 2e6, 4e6])
    }

    #[test]
    fn paper_sized_grid_counts() {
        let p = plan(&paper_grid(), &catalog(), &PlanOptions::default()).unwrap();
        assert_eq!(p.executed.len(), 9);
        assert_eq!(p.predicted.len(), 36);
        assert_eq!(p.total(), 45);
        assert!((p.reduction_percent() - 80.0).abs() < 1e-12);
        assert_eq!(p.baseline_sku, "HBv2");
        assert_eq!(p.probe_nodes, vec![1, 16]);
        assert_eq!(p.count_method(METHOD_CROSS_VM), 6);
        assert_eq!(p.count_method(METHOD_CROSS_INPUT), 30);
        assert_eq!(p.probe_counts.get("HC"), Some(&2));
        assert!(p.to_string().starts_with("executed 9 / 45 (80.0% reduction)"));
    }

    #[test]
    fn single_probe_uses_largest_node_count() {
        let opts = PlanOptions {
            probes_per_sku: 1,
            baseline: Some("HC".into()),
            ..Default::default()
        };
        let p = plan(&paper_grid(), &catalog(), &opts).unwrap();
        assert_eq!(p.baseline_sku, "HC");
        assert_eq!(p.probe_nodes, vec![16]);
        assert_eq!(p.executed.len(), 7);
        assert!(p
            .executed
            .iter()
            .filter(|s| s.sku_name != "HC")
            .all(|s| s.n_vms == 16));
    }

    #[test]
    fn nothing_to_predict() {
        let p = plan(&grid(&["HBv3"], &[1, 2, 4, 8, 16], &[1e6]), &catalog(), &PlanOptions::default())
            .unwrap();
        assert_eq!(p.executed.len(), 5);
        assert!(p.predicted.is_empty());
    }

    #[test]
    fn plan_errors() {
        let opts = PlanOptions {
            probes_per_sku: 3,
            ..Default::default()
        };
        assert!(matches!(
            plan(&paper_grid(), &catalog(), &opts),
            Err(PlanError::InvalidProbeCount(3))
        ));
        let opts = PlanOptions {
            baseline: Some("HBv4".into()),
            ..Default::default()
        };
        assert!(matches!(
            plan(&paper_grid(), &catalog(), &opts),
            Err(PlanError::UnknownBaseline(_))
        ));
        let bad = grid(&["HC"], &[2, 1], &[1e6]);
        assert!(plan(&bad, &catalog(), &PlanOptions::default()).is_err());
        let mut mixed = paper_grid();
        mixed.inputs.push(AppInput::new("openfoam", "iterations", 5.0));
        assert!(plan(&mixed, &catalog(), &PlanOptions::default()).is_err());
        let mut too_many = paper_grid();
        too_many.procs_per_vm = ProcsPolicy::Fixed(64);
        assert!(plan(&too_many, &catalog(), &PlanOptions::default()).is_err());
    }

    #[test]
    fn calibration_adds_one_run_per_extra_input() {
        let opts = PlanOptions {
            calibrate_inputs: true,
            ..Default::default()
        };
        let p = plan(&paper_grid(), &catalog(), &opts).unwrap();
        assert_eq!(p.executed.len(), 11);
        assert_eq!(p.calibration.len(), 2);
        assert!(p.calibration.iter().all(|s| s.sku_name == "HBv2" && s.n_vms == 16));
        assert_eq!(p.total(), 45);
    }

    #[test]
    fn grid_file_parsing() {
        let text = r#"{"app_name":"lammps","param_name":"atoms","param_values":[1e6,2e6],
            "skus":["HC"],"node_counts":[1,2],"procs_per_vm":32}"#;
        let g: ScenarioGrid = serde_json::from_str::<GridFile>(text).unwrap().into();
        assert_eq!(g.procs_per_vm, ProcsPolicy::Fixed(32));
        let text = r#"{"app_name":"lammps","param_name":"atoms","param_values":[1e6],
            "skus":["HC"],"node_counts":[1],"procs_per_vm":"all-cores"}"#;
        let g: ScenarioGrid = serde_json::from_str::<GridFile>(text).unwrap().into();
        assert_eq!(g.procs_per_vm, ProcsPolicy::AllCores);
        let text = r#"{"app_name":"lammps","param_name":"atoms","param_values":[1e6],
            "skus":["HC"],"node_counts":[1],"procs_per_vm":"half"}"#;
        assert!(serde_json::from_str::<GridFile>(text).is_err());
    }

    fn record(sku: &str, n: u32, t: f64, p: Provenance) -> BenchmarkRecord {
        let s = Scenario::new(sku, n, 44, AppInput::new("openfoam", "cells", 1e6));
        if p == Provenance::Predicted {
            BenchmarkRecord::predicted(s, t, METHOD_CROSS_VM, DateTime::UNIX_EPOCH)
        } else {
            BenchmarkRecord::executed(s, t, p, DateTime::UNIX_EPOCH)
        }
    }

    #[test]
    fn evaluate_examples() {
        let truth = Dataset::from_records(vec![
            record("HC", 1, 100.0, Provenance::Simulated),
            record("HC", 2, 200.0, Provenance::Simulated),
        ])
        .unwrap();
        let exact = Dataset::from_records(vec![
            record("HC", 1, 100.0, Provenance::Predicted),
            record("HC", 2, 200.0, Provenance::Predicted),
        ])
        .unwrap();
        let r = evaluate(&exact, &truth).unwrap();
        assert_eq!(r.mape, 0.0);
        assert_eq!(r.count(), 2);

        let off = Dataset::from_records(vec![record("HC", 1, 110.0, Provenance::Predicted)]).unwrap();
        let r = evaluate(&off, &truth).unwrap();
        assert!((r.mape - 10.0).abs() < 1e-12);
        assert!((r.max_ape - 10.0).abs() < 1e-12);

        let missing = Dataset::from_records(vec![record("HC", 4, 50.0, Provenance::Predicted)]).unwrap();
        assert!(matches!(
            evaluate(&missing, &truth),
            Err(PlanError::MissingGroundTruth(_))
        ));
    }

    proptest! {
        #[test]
        fn plan_partitions_grid(
            n_skus in 1usize..=3,
            nodes in prop::collection::btree_set(1u32..64, 1..6),
            n_inputs in 1usize..4,
            probes in 1usize..=2,
        ) {
            let skus = &["HC", "HBv2", "HBv3"][..n_skus];
            let values: Vec<f64> = (1..=n_inputs).map(|i| i as f64 * 1e6).collect();
            let nodes: Vec<u32> = nodes.into_iter().collect();
            let g = grid(skus, &nodes, &values);
            let opts = PlanOptions { probes_per_sku: probes, ..Default::default() };
            let p = plan(&g, &catalog(), &opts).unwrap();
            let all: BTreeSet<Scenario> = g.scenarios(&catalog()).unwrap().into_iter().collect();
            let executed: BTreeSet<Scenario> = p.executed.iter().cloned().collect();
            let predicted: BTreeSet<Scenario> = p.predicted.iter().map(|x| x.scenario.clone()).collect();
            prop_assert_eq!(executed.len(), p.executed.len());
            prop_assert_eq!(predicted.len(), p.predicted.len());
            prop_assert!(executed.is_disjoint(&predicted));
            let union: BTreeSet<Scenario> = executed.union(&predicted).cloned().collect();
            prop_assert_eq!(&union, &all);
            let effective_probes = probes.min(nodes.len());
            prop_assert_eq!(p.executed.len(), nodes.len() + effective_probes * (n_skus - 1));
            prop_assert_eq!(p.predicted.len(), all.len() - p.executed.len());
            prop_assert!(p.probe_counts.values().all(|&c| c == 1 || c == 2));
        }
    }
}
