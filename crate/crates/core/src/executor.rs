//! Scenario execution backends.
//!
//! The [`Simulator`] stands in for real application runs with a synthetic
//! strong-scaling model:
//!
//! ```text
//! t = (p / p₀) · (t_s + t_p / cores^α) + γ · log₂(max(n_vms, 2))
//! ```
//!
//! where `cores = n_vms · procs_per_vm`. When a cache threshold is set and the
//! per-VM working set `p / n_vms` falls below it, the parallel term is divided
//! by the cache speedup β, which produces super-linear speedups. The result is
//! multiplied by lognormal noise whose stream is seeded from the model seed
//! and the scenario key, so a scenario's time does not depend on execution
//! order.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Provenance, Scenario, VmCatalog};

#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("VM type `{0}` is not described by the model")]
    UnknownModelSku(String),
    #[error("VM type `{0}` is not in the catalog")]
    UnknownCatalogSku(String),
    #[error("invalid synthetic model: {0}")]
    InvalidModel(String),
    #[error("cannot read model file {path}: {message}")]
    ModelFile { path: String, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub scenario: Scenario,
    /// Zero for failed runs.
    pub exec_time_s: f64,
    pub status: OutcomeStatus,
    pub detail: String,
}

impl ExecutionOutcome {
    pub fn ok(scenario: Scenario, exec_time_s: f64) -> Self {
        ExecutionOutcome {
            scenario,
            exec_time_s,
            status: OutcomeStatus::Ok,
            detail: String::new(),
        }
    }

    pub fn failed(scenario: Scenario, detail: impl Into<String>) -> Self {
        ExecutionOutcome {
            scenario,
            exec_time_s: 0.0,
            status: OutcomeStatus::Failed,
            detail: detail.into(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == OutcomeStatus::Ok
    }
}

/// Runs scenarios. Implementations must be safe to call concurrently and
/// each run must depend only on its scenario and the backend's fixed state.
pub trait Executor: Sync {
    fn run(&self, scenario: &Scenario, catalog: &VmCatalog) -> ExecutionOutcome;

    /// Provenance of records produced from this backend's outcomes.
    fn provenance(&self) -> Provenance;

    fn name(&self) -> &str;
}

/// Per-VM-type performance parameters of the synthetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkuPerformance {
    pub serial_time_s: f64,
    /// Parallel work in core-seconds at the reference input.
    pub parallel_work_s: f64,
    /// Parallel efficiency exponent α in (0, 1].
    #[serde(default = "one")]
    pub efficiency_exponent: f64,
    /// Communication coefficient γ in seconds per log₂ VM.
    #[serde(default)]
    pub comm_coeff_s: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticModel {
    /// Input value p₀ at which `parallel_work_s` and `serial_time_s` apply.
    pub reference_input: f64,
    pub skus: BTreeMap<String, SkuPerformance>,
    /// Per-VM working-set size under which the cache speedup applies.
    #[serde(default)]
    pub cache_threshold: Option<f64>,
    #[serde(default = "one")]
    pub cache_speedup: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticModel {
    pub fn validate(&self) -> Result<(), ExecutorError> {
        let bad = |m: String| Err(ExecutorError::InvalidModel(m));
        if !(self.reference_input.is_finite() && self.reference_input > 0.0) {
            return bad("reference_input must be positive".into());
        }
        if !(self.cache_speedup.is_finite() && self.cache_speedup >= 1.0) {
            return bad("cache_speedup must be at least 1".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative".into());
        }
        if let Some(th) = self.cache_threshold {
            if !(th.is_finite() && th > 0.0) {
                return bad("cache_threshold must be positive".into());
            }
        }
        for (name, p) in &self.skus {
            if !(p.serial_time_s >= 0.0 && p.serial_time_s.is_finite()) {
                return bad(format!("{name}: serial_time_s must be non-negative"));
            }
            if !(p.parallel_work_s > 0.0 && p.parallel_work_s.is_finite()) {
                return bad(format!("{name}: parallel_work_s must be positive"));
            }
            if !(p.efficiency_exponent > 0.0 && p.efficiency_exponent <= 1.0) {
                return bad(format!("{name}: efficiency_exponent must be in (0, 1]"));
            }
            if !(p.comm_coeff_s >= 0.0 && p.comm_coeff_s.is_finite()) {
                return bad(format!("{name}: comm_coeff_s must be non-negative"));
            }
        }
        Ok(())
    }

    /// Loads a model from a JSON document.
    pub fn load(path: &Path) -> Result<Self, ExecutorError> {
        let file_err = |message: String| ExecutorError::ModelFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let model: SyntheticModel =
            serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// Noise-free model time.
    fn base_time(&self, perf: &SkuPerformance, scenario: &Scenario) -> f64 {
        let input_ratio = scenario.input.value / self.reference_input;
        let cores = scenario.total_processes() as f64;
        let mut parallel = perf.parallel_work_s / cores.powf(perf.efficiency_exponent);
        if let Some(threshold) = self.cache_threshold {
            if scenario.input.value / f64::from(scenario.n_vms) < threshold {
                parallel /= self.cache_speedup;
            }
        }
        let comm = perf.comm_coeff_s * f64::from(scenario.n_vms.max(2)).log2();
        input_ratio * (perf.serial_time_s + parallel) + comm
    }

    fn noise(&self, scenario: &Scenario) -> f64 {
        if self.noise_sigma == 0.0 {
            return 1.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed(self.seed, scenario));
        LogNormal::new(0.0, self.noise_sigma)
            .expect("sigma validated")
            .sample(&mut rng)
    }
}

/// Derives a per-scenario RNG seed from the model seed and scenario key.
pub fn scenario_seed(seed: u64, scenario: &Scenario) -> u64 {
    let key = format!(
        "{seed}|{}|{}|{:016x}|{}|{}|{}",
        scenario.input.app_name,
        scenario.input.param_name,
        scenario.input.value.to_bits(),
        scenario.sku_name,
        scenario.n_vms,
        scenario.procs_per_vm
    );
    let digest = Sha256::digest(key.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Simulated execution time of `scenario` under `model`.
pub fn simulate(
    model: &SyntheticModel,
    scenario: &Scenario,
    catalog: &VmCatalog,
) -> Result<f64, ExecutorError> {
    let perf = model
        .skus
        .get(&scenario.sku_name)
        .ok_or_else(|| ExecutorError::UnknownModelSku(scenario.sku_name.clone()))?;
    if catalog.get(&scenario.sku_name).is_none() {
        return Err(ExecutorError::UnknownCatalogSku(scenario.sku_name.clone()));
    }
    Ok(model.base_time(perf, scenario) * model.noise(scenario))
}

#[derive(Debug, Clone)]
pub struct Simulator {
    pub model: SyntheticModel,
}

impl Simulator {
    pub fn new(model: SyntheticModel) -> Result<Self, ExecutorError> {
        model.validate()?;
        Ok(Simulator { model })
    }
}

impl Executor for Simulator {
    fn run(&self, scenario: &Scenario, catalog: &VmCatalog) -> ExecutionOutcome {
        if let Err(e) = scenario.validate_against(catalog) {
            return ExecutionOutcome::failed(scenario.clone(), e.to_string());
        }
        match simulate(&self.model, scenario, catalog) {
            Ok(t) => ExecutionOutcome::ok(scenario.clone(), t),
            Err(e) => ExecutionOutcome::failed(scenario.clone(), e.to_string()),
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Simulated
    }

    fn name(&self) -> &str {
        "simulate"
    }
}

/// Replays executed records from a fixture dataset.
#[derive(Debug, Clone)]
pub struct ReplayExecutor {
    fixture: Dataset,
}

impl ReplayExecutor {
    pub fn new(fixture: Dataset) -> Self {
        ReplayExecutor { fixture }
    }

    pub fn load(path: &Path) -> Result<Self, ExecutorError> {
        let (dataset, _) = crate::dataset::ingest_records(path, Dataset::new())?;
        Ok(ReplayExecutor::new(dataset))
    }
}

impl Executor for ReplayExecutor {
    fn run(&self, scenario: &Scenario, _catalog: &VmCatalog) -> ExecutionOutcome {
        match self.fixture.executed(scenario) {
            Some(r) => ExecutionOutcome::ok(scenario.clone(), r.exec_time_s),
            None => ExecutionOutcome::failed(scenario.clone(), "scenario not in replay fixture"),
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Measured
    }

    fn name(&self) -> &str {
        "replay"
    }
}

/// Placeholder for a real cloud backend; every run fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct CloudStub;

impl Executor for CloudStub {
    fn run(&self, scenario: &Scenario, _catalog: &VmCatalog) -> ExecutionOutcome {
        ExecutionOutcome::failed(scenario.clone(), "backend not built")
    }

    fn provenance(&self) -> Provenance {
        Provenance::Measured
    }

    fn name(&self) -> &str {
        "cloud-stub"
    }
}
