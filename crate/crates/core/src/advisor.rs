//! Cost model and Pareto-front recommendation over (execution time, cost).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AppInput, Dataset, Provenance, Scenario, VmCatalog, VmSku};

#[derive(Debug, Error)]
pub enum AdvisorError {
    #[error("cannot compute a Pareto front of zero points")]
    EmptyInput,
    #[error("no benchmark data for {0}")]
    NoData(String),
    #[error("VM type `{0}` is not in the catalog")]
    UnknownSku(String),
}

/// How execution time is billed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BillingMode {
    /// Round each VM's time up to whole minutes.
    #[default]
    PerMinute,
    Exact,
}

impl BillingMode {
    /// Seconds that are billed for a run of `exec_time_s` seconds.
    pub fn billed_seconds(self, exec_time_s: f64) -> f64 {
        match self {
            BillingMode::PerMinute => (exec_time_s / 60.0).ceil() * 60.0,
            BillingMode::Exact => exec_time_s,
        }
    }
}

impl std::str::FromStr for BillingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-minute" => Ok(BillingMode::PerMinute),
            "exact" => Ok(BillingMode::Exact),
            other => Err(format!("unknown billing mode `{other}` (per-minute|exact)")),
        }
    }
}

/// USD cost of running `n_vms` VMs of `sku` for `exec_time_s` seconds.
pub fn compute_cost(exec_time_s: f64, n_vms: u32, sku: &VmSku, billing: BillingMode) -> f64 {
    billing.billed_seconds(exec_time_s) / 3600.0 * f64::from(n_vms) * sku.price_per_hour
}

/// A configuration with its execution time and cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostedPoint {
    pub scenario: Scenario,
    pub exec_time_s: f64,
    pub cost: f64,
    pub provenance: Provenance,
    pub method: Option<String>,
}

impl CostedPoint {
    /// Canonical tie-break order: scenario key, then provenance.
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.scenario
            .cmp(&other.scenario)
            .then(self.provenance.cmp(&other.provenance))
    }

    fn objective_cmp(&self, other: &Self) -> Ordering {
        self.exec_time_s
            .total_cmp(&other.exec_time_s)
            .then(self.cost.total_cmp(&other.cost))
            .then_with(|| self.key_cmp(other))
    }

    pub fn dominates(&self, other: &CostedPoint) -> bool {
        self.exec_time_s <= other.exec_time_s
            && self.cost <= other.cost
            && (self.exec_time_s < other.exec_time_s || self.cost < other.cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoResult {
    /// Non-dominated points by ascending time (and strictly descending cost).
    pub front: Vec<CostedPoint>,
    /// Everything else, ordered by time, cost, then scenario key.
    pub dominated: Vec<CostedPoint>,
}

/// Notable front points. Indices refer to `ParetoResult::front`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Insights {
    pub fastest: usize,
    pub cheapest: usize,
    /// Smallest time × cost product.
    pub balanced: usize,
}

impl ParetoResult {
    pub fn len(&self) -> usize {
        self.front.len() + self.dominated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.front.is_empty() && self.dominated.is_empty()
    }

    pub fn insights(&self) -> Insights {
        let balanced = self
            .front
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1.exec_time_s * a.1.cost).total_cmp(&(b.1.exec_time_s * b.1.cost))
            })
            .map(|(i, _)| i)
            .unwrap_or(0);
        Insights {
            fastest: 0,
            cheapest: self.front.len().saturating_sub(1),
            balanced,
        }
    }
}

/// Splits `points` into the Pareto front (minimizing both time and cost)
/// and the dominated rest. Among points equal in both objectives only the
/// first in canonical scenario order can be on the front.
pub fn pareto_front(points: Vec<CostedPoint>) -> Result<ParetoResult, AdvisorError> {
    if points.is_empty() {
        return Err(AdvisorError::EmptyInput);
    }
    let mut sorted = points;
    sorted.sort_by(CostedPoint::objective_cmp);
    let mut front = Vec::new();
    let mut dominated = Vec::new();
    let mut best_cost = f64::INFINITY;
    for p in sorted {
        if p.cost < best_cost {
            best_cost = p.cost;
            front.push(p);
        } else {
            dominated.push(p);
        }
    }
    Ok(ParetoResult { front, dominated })
}

/// Costs every record for `input` and returns their Pareto front.
pub fn costed_points(
    dataset: &Dataset,
    catalog: &VmCatalog,
    input: &AppInput,
    billing: BillingMode,
) -> Result<Vec<CostedPoint>, AdvisorError> {
    dataset
        .records()
        .filter(|r| r.scenario.input == *input)
        .map(|r| {
            let sku = catalog
                .get(&r.scenario.sku_name)
                .ok_or_else(|| AdvisorError::UnknownSku(r.scenario.sku_name.clone()))?;
            Ok(CostedPoint {
                scenario: r.scenario.clone(),
                exec_time_s: r.exec_time_s,
                cost: compute_cost(r.exec_time_s, r.scenario.n_vms, sku, billing),
                provenance: r.provenance,
                method: r.method.clone(),
            })
        })
        .collect()
}

pub fn recommend(
    dataset: &Dataset,
    catalog: &VmCatalog,
    input: &AppInput,
    billing: BillingMode,
) -> Result<ParetoResult, AdvisorError> {
    let points = costed_points(dataset, catalog, input, billing)?;
    if points.is_empty() {
        return Err(AdvisorError::NoData(input.to_string()));
    }
    pareto_front(points)
}
