//! Benchmark records, the VM catalog, and their line-delimited JSON persistence.
//!
//! Both the catalog and the dataset are stored as JSON Lines: one object per
//! line, blank lines ignored, unknown fields ignored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Method tag carried by records produced by cross-VM-type prediction.
pub const METHOD_CROSS_VM: &str = "cross-vm";
/// Method tag carried by records produced by cross-input prediction.
pub const METHOD_CROSS_INPUT: &str = "cross-input";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate VM type `{0}` in catalog")]
    DuplicateSku(String),
    #[error("invalid VM type `{name}`: {reason}")]
    InvalidSku { name: String, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("no records for {sku} / {input} / {procs_per_vm} procs per VM")]
    NoMatchingRecords {
        sku: String,
        input: String,
        procs_per_vm: u32,
    },
    #[error("invalid scaling curve: {0}")]
    InvalidCurve(String),
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// A selectable VM type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmSku {
    pub name: String,
    pub cores_per_vm: u32,
    /// USD per VM-hour.
    pub price_per_hour: f64,
    #[serde(default)]
    pub family: String,
}

impl VmSku {
    pub fn new(name: &str, cores_per_vm: u32, price_per_hour: f64, family: &str) -> Self {
        VmSku {
            name: name.to_string(),
            cores_per_vm,
            price_per_hour,
            family: family.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let invalid = |reason: &str| DatasetError::InvalidSku {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(invalid("name is empty"));
        }
        if self.cores_per_vm == 0 {
            return Err(invalid("cores_per_vm must be at least 1"));
        }
        if !(self.price_per_hour.is_finite() && self.price_per_hour > 0.0) {
            return Err(invalid("price_per_hour must be positive"));
        }
        Ok(())
    }
}

/// Validated list of VM types with unique names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VmCatalog {
    skus: Vec<VmSku>,
}

impl VmCatalog {
    pub fn new(skus: Vec<VmSku>) -> Result<Self, DatasetError> {
        let mut seen = std::collections::BTreeSet::new();
        for sku in &skus {
            sku.validate()?;
            if !seen.insert(sku.name.clone()) {
                return Err(DatasetError::DuplicateSku(sku.name.clone()));
            }
        }
        Ok(VmCatalog { skus })
    }

    pub fn get(&self, name: &str) -> Option<&VmSku> {
        self.skus.iter().find(|s| s.name == name)
    }

    pub fn skus(&self) -> &[VmSku] {
        &self.skus
    }

    pub fn len(&self) -> usize {
        self.skus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skus.is_empty()
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let mut skus = Vec::new();
        for line in json_lines(reader) {
            let (line_no, text) = line?;
            let sku: VmSku = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            skus.push(sku);
        }
        VmCatalog::new(skus)
    }

    pub fn to_writer<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for sku in &self.skus {
            serde_json::to_writer(&mut writer, sku)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Reads a VM catalog file.
pub fn load_catalog(path: &Path) -> Result<VmCatalog, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    VmCatalog::from_reader(file)
}

/// An application input parameter value, e.g. `cells = 1e6` for a CFD run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppInput {
    pub app_name: String,
    pub param_name: String,
    pub value: f64,
}

impl AppInput {
    pub fn new(app_name: &str, param_name: &str, value: f64) -> Self {
        AppInput {
            app_name: app_name.to_string(),
            param_name: param_name.to_string(),
            value,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.app_name.is_empty() || self.param_name.is_empty() {
            return Err(DatasetError::InvalidRecord(
                "app_name and param_name must be non-empty".into(),
            ));
        }
        if !(self.value.is_finite() && self.value > 0.0) {
            return Err(DatasetError::InvalidRecord(format!(
                "input value must be positive, got {}",
                self.value
            )));
        }
        Ok(())
    }

    /// Same application and parameter, possibly a different value.
    pub fn same_parameter(&self, other: &AppInput) -> bool {
        self.app_name == other.app_name && self.param_name == other.param_name
    }
}

impl PartialEq for AppInput {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for AppInput {}

impl PartialOrd for AppInput {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AppInput {
    fn cmp(&self, other: &Self) -> Ordering {
        self.app_name
            .cmp(&other.app_name)
            .then_with(|| self.param_name.cmp(&other.param_name))
            .then_with(|| self.value.total_cmp(&other.value))
    }
}

impl fmt::Display for AppInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}={}", self.app_name, self.param_name, self.value)
    }
}

/// One candidate execution configuration.
///
/// Ordering is the canonical scenario-key order used for sorting datasets,
/// tables and Pareto tie-breaks: input, then VM type, VM count, processes per VM.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Scenario {
    pub input: AppInput,
    pub sku_name: String,
    pub n_vms: u32,
    pub procs_per_vm: u32,
}

impl Scenario {
    pub fn new(sku_name: &str, n_vms: u32, procs_per_vm: u32, input: AppInput) -> Self {
        Scenario {
            input,
            sku_name: sku_name.to_string(),
            n_vms,
            procs_per_vm,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.sku_name.is_empty() {
            return Err(DatasetError::InvalidRecord("sku_name is empty".into()));
        }
        if self.n_vms == 0 {
            return Err(DatasetError::InvalidRecord("n_vms must be at least 1".into()));
        }
        if self.procs_per_vm == 0 {
            return Err(DatasetError::InvalidRecord(
                "procs_per_vm must be at least 1".into(),
            ));
        }
        self.input.validate()
    }

    /// Checks the scenario against a catalog: the VM type must exist and
    /// `procs_per_vm` must fit on it.
    pub fn validate_against(&self, catalog: &VmCatalog) -> Result<(), DatasetError> {
        self.validate()?;
        let sku = catalog.get(&self.sku_name).ok_or_else(|| {
            DatasetError::InvalidRecord(format!("unknown VM type `{}`", self.sku_name))
        })?;
        if self.procs_per_vm > sku.cores_per_vm {
            return Err(DatasetError::InvalidRecord(format!(
                "{} processes per VM exceed the {} cores of {}",
                self.procs_per_vm, sku.cores_per_vm, sku.name
            )));
        }
        Ok(())
    }

    pub fn total_processes(&self) -> u64 {
        u64::from(self.n_vms) * u64::from(self.procs_per_vm)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}x{} ppn={}",
            self.input, self.sku_name, self.n_vms, self.procs_per_vm
        )
    }
}

/// Where an execution time came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Simulated,
    Predicted,
}

impl Provenance {
    pub const ALL: [Provenance; 3] = [
        Provenance::Measured,
        Provenance::Simulated,
        Provenance::Predicted,
    ];
    /// Measured or simulated, i.e. produced by running the scenario.
    pub const EXECUTED: [Provenance; 2] = [Provenance::Measured, Provenance::Simulated];

    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Simulated => "simulated",
            Provenance::Predicted => "predicted",
        }
    }

    pub fn is_executed(self) -> bool {
        self != Provenance::Predicted
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "measured" => Ok(Provenance::Measured),
            "simulated" => Ok(Provenance::Simulated),
            "predicted" => Ok(Provenance::Predicted),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub scenario: Scenario,
    pub exec_time_s: f64,
    pub provenance: Provenance,
    /// Prediction method; present exactly when `provenance` is predicted.
    pub method: Option<String>,
    pub timestamp: DateTime<Utc>,
}

impl BenchmarkRecord {
    pub fn executed(
        scenario: Scenario,
        exec_time_s: f64,
        provenance: Provenance,
        timestamp: DateTime<Utc>,
    ) -> Self {
        BenchmarkRecord {
            scenario,
            exec_time_s,
            provenance,
            method: None,
            timestamp,
        }
    }

    pub fn predicted(
        scenario: Scenario,
        exec_time_s: f64,
        method: &str,
        timestamp: DateTime<Utc>,
    ) -> Self {
        BenchmarkRecord {
            scenario,
            exec_time_s,
            provenance: Provenance::Predicted,
            method: Some(method.to_string()),
            timestamp,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        self.scenario.validate()?;
        if !(self.exec_time_s.is_finite() && self.exec_time_s > 0.0) {
            return Err(DatasetError::InvalidRecord(format!(
                "exec_time_s must be positive, got {}",
                self.exec_time_s
            )));
        }
        match (self.provenance, &self.method) {
            (Provenance::Predicted, None) => Err(DatasetError::InvalidRecord(
                "predicted record without a method tag".into(),
            )),
            (p, Some(m)) if p != Provenance::Predicted => Err(DatasetError::InvalidRecord(
                format!("{p} record carries method tag `{m}`"),
            )),
            _ => Ok(()),
        }
    }

    pub fn key(&self) -> (Scenario, Provenance) {
        (self.scenario.clone(), self.provenance)
    }
}

/// Flat on-disk shape of a benchmark record.
#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    app_name: String,
    param_name: String,
    param_value: f64,
    sku_name: String,
    n_vms: u32,
    procs_per_vm: u32,
    exec_time_s: f64,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    timestamp: String,
}

impl RecordRow {
    fn from_record(record: &BenchmarkRecord) -> Self {
        let s = &record.scenario;
        RecordRow {
            app_name: s.input.app_name.clone(),
            param_name: s.input.param_name.clone(),
            param_value: s.input.value,
            sku_name: s.sku_name.clone(),
            n_vms: s.n_vms,
            procs_per_vm: s.procs_per_vm,
            exec_time_s: record.exec_time_s,
            provenance: record.provenance,
            method: record.method.clone(),
            timestamp: format_timestamp(&record.timestamp),
        }
    }

    fn into_record(self) -> Result<BenchmarkRecord, DatasetError> {
        let timestamp = DateTime::parse_from_rfc3339(&self.timestamp)
            .map_err(|e| {
                DatasetError::InvalidRecord(format!("bad timestamp `{}`: {e}", self.timestamp))
            })?
            .with_timezone(&Utc);
        let record = BenchmarkRecord {
            scenario: Scenario::new(
                &self.sku_name,
                self.n_vms,
                self.procs_per_vm,
                AppInput::new(&self.app_name, &self.param_name, self.param_value),
            ),
            exec_time_s: self.exec_time_s,
            provenance: self.provenance,
            method: self.method,
            timestamp,
        };
        record.validate()?;
        Ok(record)
    }
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

/// A set of benchmark records holding at most one record per
/// (scenario, provenance) pair, iterated in canonical order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    records: BTreeMap<(Scenario, Provenance), BenchmarkRecord>,
}

/// Outcome of an ingest: how many records were accepted and which were rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestSummary {
    pub accepted: usize,
    pub replaced: usize,
    /// (record index within the file, reason)
    pub rejected: Vec<(usize, String)>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn from_records<I: IntoIterator<Item = BenchmarkRecord>>(
        records: I,
    ) -> Result<Self, DatasetError> {
        let mut dataset = Dataset::new();
        for record in records {
            dataset.insert(record)?;
        }
        Ok(dataset)
    }

    /// Inserts a record, replacing any record with the same scenario and
    /// provenance. Returns the replaced record.
    pub fn insert(
        &mut self,
        record: BenchmarkRecord,
    ) -> Result<Option<BenchmarkRecord>, DatasetError> {
        record.validate()?;
        Ok(self.records.insert(record.key(), record))
    }

    /// Merges `other` into `self`; records of `other` win on key collisions.
    pub fn merge(&mut self, other: Dataset) {
        self.records.extend(other.records);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &BenchmarkRecord> {
        self.records.values()
    }

    pub fn get(&self, scenario: &Scenario, provenance: Provenance) -> Option<&BenchmarkRecord> {
        self.records.get(&(scenario.clone(), provenance))
    }

    /// Executed (measured, else simulated) record for a scenario.
    pub fn executed(&self, scenario: &Scenario) -> Option<&BenchmarkRecord> {
        Provenance::EXECUTED
            .iter()
            .find_map(|p| self.get(scenario, *p))
    }

    pub fn inputs(&self) -> Vec<AppInput> {
        let mut inputs: Vec<AppInput> =
            self.records().map(|r| r.scenario.input.clone()).collect();
        inputs.dedup();
        inputs.sort();
        inputs.dedup();
        inputs
    }

    pub fn count_by_provenance(&self, provenance: Provenance) -> usize {
        self.records().filter(|r| r.provenance == provenance).count()
    }

    /// Parses JSON Lines records and merges them in file order. Malformed
    /// lines abort with a parse error; records that parse but violate an
    /// invariant are rejected individually and reported in the summary.
    pub fn ingest_reader<R: Read>(&mut self, reader: R) -> Result<IngestSummary, DatasetError> {
        let mut summary = IngestSummary::default();
        for (index, line) in json_lines(reader).enumerate() {
            let (line_no, text) = line?;
            let row: RecordRow = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            match row.into_record() {
                Ok(record) => {
                    if self.records.insert(record.key(), record).is_some() {
                        summary.replaced += 1;
                    }
                    summary.accepted += 1;
                }
                Err(e) => summary.rejected.push((index, e.to_string())),
            }
        }
        Ok(summary)
    }

    /// Writes all records as JSON Lines in canonical order.
    pub fn to_writer<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        for record in self.records() {
            serde_json::to_writer(&mut writer, &RecordRow::from_record(record))?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Writes the dataset to `path` via a temporary file and atomic rename.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        write_atomic(path, self.to_json_lines().as_bytes())
    }

    /// Loads a dataset file; a missing file yields an empty dataset.
    pub fn load_or_default(path: &Path) -> Result<(Dataset, IngestSummary), DatasetError> {
        if !path.exists() {
            return Ok((Dataset::new(), IngestSummary::default()));
        }
        ingest_records(path, Dataset::new())
    }
}

/// Ingests a record file into `dataset`, returning the merged dataset.
pub fn ingest_records(
    path: &Path,
    mut dataset: Dataset,
) -> Result<(Dataset, IngestSummary), DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let summary = dataset.ingest_reader(file)?;
    Ok((dataset, summary))
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DatasetError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| DatasetError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| DatasetError::io(path, e.error))?;
    Ok(())
}

/// Non-blank lines with 1-based line numbers.
fn json_lines<R: Read>(reader: R) -> impl Iterator<Item = Result<(usize, String), DatasetError>> {
    BufReader::new(reader)
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(text) if text.trim().is_empty() => None,
            Ok(text) => Some(Ok((i + 1, text))),
            Err(e) => Some(Err(DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })),
        })
}

/// Execution time versus VM count for one (VM type, input, processes per VM).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCurve {
    pub sku_name: String,
    pub input: AppInput,
    pub procs_per_vm: u32,
    points: Vec<(u32, f64)>,
}

impl ScalingCurve {
    /// Builds a curve; points are sorted by VM count and must be non-empty,
    /// positive, and free of duplicate VM counts.
    pub fn new(
        sku_name: &str,
        input: AppInput,
        procs_per_vm: u32,
        mut points: Vec<(u32, f64)>,
    ) -> Result<Self, DatasetError> {
        if points.is_empty() {
            return Err(DatasetError::InvalidCurve("no points".into()));
        }
        points.sort_by_key(|p| p.0);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(DatasetError::InvalidCurve(format!(
                    "duplicate VM count {}",
                    w[0].0
                )));
            }
        }
        if let Some(&(n, t)) = points.iter().find(|(n, t)| *n == 0 || !(t.is_finite() && *t > 0.0)) {
            return Err(DatasetError::InvalidCurve(format!(
                "invalid point ({n}, {t})"
            )));
        }
        Ok(ScalingCurve {
            sku_name: sku_name.to_string(),
            input,
            procs_per_vm,
            points,
        })
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    pub fn node_range(&self) -> (u32, u32) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    pub fn time_at(&self, n_vms: u32) -> Option<f64> {
        self.points
            .binary_search_by_key(&n_vms, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// Same curve with every time transformed by `f`.
    pub fn map_times(&self, f: impl Fn(f64) -> f64) -> Result<ScalingCurve, DatasetError> {
        ScalingCurve::new(
            &self.sku_name,
            self.input.clone(),
            self.procs_per_vm,
            self.points.iter().map(|&(n, t)| (n, f(t))).collect(),
        )
    }

    pub fn scenario(&self, n_vms: u32) -> Scenario {
        Scenario::new(&self.sku_name, n_vms, self.procs_per_vm, self.input.clone())
    }

    /// Predicted records for every point of the curve.
    pub fn to_predicted_records(
        &self,
        method: &str,
        timestamp: DateTime<Utc>,
    ) -> Vec<BenchmarkRecord> {
        self.points
            .iter()
            .map(|&(n, t)| BenchmarkRecord::predicted(self.scenario(n), t, method, timestamp))
            .collect()
    }
}

/// Collects the scaling curve of one VM type / input / processes-per-VM from
/// records whose provenance is in `provenances`.
///
/// When several provenances exist for the same VM count, the first one in
/// `Provenance` order wins (measured, then simulated, then predicted).
pub fn extract_curve(
    dataset: &Dataset,
    sku_name: &str,
    input: &AppInput,
    procs_per_vm: u32,
    provenances: &[Provenance],
) -> Result<ScalingCurve, DatasetError> {
    let mut by_nodes: BTreeMap<u32, (Provenance, f64)> = BTreeMap::new();
    for record in dataset.records() {
        let s = &record.scenario;
        if s.sku_name != sku_name
            || s.input != *input
            || s.procs_per_vm != procs_per_vm
            || !provenances.contains(&record.provenance)
        {
            continue;
        }
        let entry = by_nodes
            .entry(s.n_vms)
            .or_insert((record.provenance, record.exec_time_s));
        if record.provenance < entry.0 {
            *entry = (record.provenance, record.exec_time_s);
        }
    }
    if by_nodes.is_empty() {
        return Err(DatasetError::NoMatchingRecords {
            sku: sku_name.to_string(),
            input: input.to_string(),
            procs_per_vm,
        });
    }
    ScalingCurve::new(
        sku_name,
        input.clone(),
        procs_per_vm,
        by_nodes.into_iter().map(|(n, (_, t))| (n, t)).collect(),
    )
}
