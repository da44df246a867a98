//! CSV tables and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::advisor::{compute_cost, BillingMode, CostedPoint, ParetoResult};
use crate::dataset::{write_atomic, AppInput, Dataset, DatasetError, Provenance, VmCatalog};

pub const PLOT_WIDTH: f64 = 800.0;
pub const PLOT_HEIGHT: f64 = 500.0;

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to report")]
    Empty,
    #[error("invalid plot: {0}")]
    InvalidPlot(String),
    #[error("VM type `{0}` is not in the catalog")]
    UnknownSku(String),
    #[error("table: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// One table row. Column order is the file's column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub app_name: String,
    pub param_name: String,
    pub param_value: f64,
    pub sku_name: String,
    pub n_vms: u32,
    pub procs_per_vm: u32,
    pub exec_time_s: f64,
    pub cost_usd: f64,
    pub provenance: Provenance,
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pareto: Option<ParetoClass>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParetoClass {
    Front,
    Dominated,
}

impl TableRow {
    fn from_point(p: &CostedPoint, class: Option<ParetoClass>) -> Self {
        let s = &p.scenario;
        TableRow {
            app_name: s.input.app_name.clone(),
            param_name: s.input.param_name.clone(),
            param_value: s.input.value,
            sku_name: s.sku_name.clone(),
            n_vms: s.n_vms,
            procs_per_vm: s.procs_per_vm,
            exec_time_s: p.exec_time_s,
            cost_usd: p.cost,
            provenance: p.provenance,
            method: p.method.clone(),
            pareto: class,
        }
    }
}

/// Table rows for every record of a dataset, in canonical order.
pub fn dataset_rows(
    dataset: &Dataset,
    catalog: &VmCatalog,
    billing: BillingMode,
) -> Result<Vec<TableRow>, ReportError> {
    dataset
        .records()
        .map(|r| {
            let sku = catalog
                .get(&r.scenario.sku_name)
                .ok_or_else(|| ReportError::UnknownSku(r.scenario.sku_name.clone()))?;
            let point = CostedPoint {
                scenario: r.scenario.clone(),
                exec_time_s: r.exec_time_s,
                cost: compute_cost(r.exec_time_s, r.scenario.n_vms, sku, billing),
                provenance: r.provenance,
                method: r.method.clone(),
            };
            Ok(TableRow::from_point(&point, None))
        })
        .collect()
}

/// Table rows for a Pareto result: front first (by time), then dominated.
pub fn pareto_rows(result: &ParetoResult) -> Vec<TableRow> {
    result
        .front
        .iter()
        .map(|p| TableRow::from_point(p, Some(ParetoClass::Front)))
        .chain(
            result
                .dominated
                .iter()
                .map(|p| TableRow::from_point(p, Some(ParetoClass::Dominated))),
        )
        .collect()
}

pub fn table_to_string(rows: &[TableRow]) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let with_pareto = rows.iter().any(|r| r.pareto.is_some());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "app_name",
        "param_name",
        "param_value",
        "sku_name",
        "n_vms",
        "procs_per_vm",
        "exec_time_s",
        "cost_usd",
        "provenance",
        "method",
    ];
    if with_pareto {
        header.push("pareto");
    }
    writer.write_record(&header)?;
    for r in rows {
        let mut fields = vec![
            r.app_name.clone(),
            r.param_name.clone(),
            r.param_value.to_string(),
            r.sku_name.clone(),
            r.n_vms.to_string(),
            r.procs_per_vm.to_string(),
            r.exec_time_s.to_string(),
            r.cost_usd.to_string(),
            r.provenance.to_string(),
            r.method.clone().unwrap_or_default(),
        ];
        if with_pareto {
            fields.push(match r.pareto {
                Some(ParetoClass::Front) => "front".into(),
                Some(ParetoClass::Dominated) => "dominated".into(),
                None => String::new(),
            });
        }
        writer.write_record(&fields)?;
    }
    let bytes = writer.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields is UTF-8"))
}

/// Writes a comma-separated table with a header row.
pub fn emit_table(rows: &[TableRow], path: &Path) -> Result<(), ReportError> {
    let text = table_to_string(rows)?;
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Parses a table written by [`emit_table`].
pub fn read_table(text: &str) -> Result<Vec<TableRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        let mut row: TableRow = row?;
        if row.method.as_deref() == Some("") {
            row.method = None;
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    TimeVsVms,
    CostVsVms,
    Pareto,
}

impl PlotKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            PlotKind::TimeVsVms => "time_vs_vms",
            PlotKind::CostVsVms => "cost_vs_vms",
            PlotKind::Pareto => "pareto",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesStyle {
    /// Solid line with markers.
    Measured,
    /// Dashed line with hollow markers.
    Predicted,
    /// Markers only.
    Scatter,
    /// Markers joined by a staircase line.
    Front,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxisScale {
    #[default]
    Linear,
    Log2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: AxisScale,
    pub series: Vec<Series>,
}

impl PlotSpec {
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.series.is_empty() {
            return Err(ReportError::InvalidPlot("no series".into()));
        }
        for s in &self.series {
            if s.points.is_empty() {
                return Err(ReportError::InvalidPlot(format!("series `{}` is empty", s.label)));
            }
            if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(ReportError::InvalidPlot(format!(
                    "series `{}` has non-finite values",
                    s.label
                )));
            }
            if self.x_scale == AxisScale::Log2 && s.points.iter().any(|p| p.0 <= 0.0) {
                return Err(ReportError::InvalidPlot("log2 axis needs positive x".into()));
            }
        }
        Ok(())
    }

    /// Time (or cost) versus VM count, one series per VM type and data origin.
    fn versus_vms(
        kind: PlotKind,
        dataset: &Dataset,
        input: &AppInput,
        value: impl Fn(&crate::dataset::BenchmarkRecord) -> Result<f64, ReportError>,
    ) -> Result<PlotSpec, ReportError> {
        let mut groups: BTreeMap<(String, u32, bool), Vec<(f64, f64)>> = BTreeMap::new();
        for r in dataset.records().filter(|r| r.scenario.input == *input) {
            let key = (
                r.scenario.sku_name.clone(),
                r.scenario.procs_per_vm,
                r.provenance == Provenance::Predicted,
            );
            groups
                .entry(key)
                .or_default()
                .push((f64::from(r.scenario.n_vms), value(r)?));
        }
        if groups.is_empty() {
            return Err(ReportError::Empty);
        }
        let multi_procs = {
            let mut per_sku: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
            for (sku, procs, _) in groups.keys() {
                per_sku.entry(sku).or_default().push(*procs);
            }
            per_sku.values().any(|v| {
                let mut v = v.clone();
                v.dedup();
                v.len() > 1
            })
        };
        let series = groups
            .into_iter()
            .map(|((sku, procs, predicted), mut points)| {
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                let origin = if predicted { "predicted" } else { "measured" };
                let label = if multi_procs {
                    format!("{sku} ppn={procs} ({origin})")
                } else {
                    format!("{sku} ({origin})")
                };
                Series {
                    label,
                    style: if predicted {
                        SeriesStyle::Predicted
                    } else {
                        SeriesStyle::Measured
                    },
                    points,
                }
            })
            .collect();
        let what = match kind {
            PlotKind::CostVsVms => "Cost",
            _ => "Execution time",
        };
        Ok(PlotSpec {
            kind,
            title: format!("{what} vs number of VMs ({input})"),
            x_label: "Number of VMs".into(),
            y_label: match kind {
                PlotKind::CostVsVms => "Cost (USD)".into(),
                _ => "Execution time (s)".into(),
            },
            x_scale: AxisScale::Log2,
            series,
        })
    }

    pub fn time_vs_vms(dataset: &Dataset, input: &AppInput) -> Result<PlotSpec, ReportError> {
        PlotSpec::versus_vms(PlotKind::TimeVsVms, dataset, input, |r| Ok(r.exec_time_s))
    }

    pub fn cost_vs_vms(
        dataset: &Dataset,
        catalog: &VmCatalog,
        input: &AppInput,
        billing: BillingMode,
    ) -> Result<PlotSpec, ReportError> {
        PlotSpec::versus_vms(PlotKind::CostVsVms, dataset, input, |r| {
            let sku = catalog
                .get(&r.scenario.sku_name)
                .ok_or_else(|| ReportError::UnknownSku(r.scenario.sku_name.clone()))?;
            Ok(compute_cost(r.exec_time_s, r.scenario.n_vms, sku, billing))
        })
    }

    pub fn pareto(result: &ParetoResult, title: &str) -> PlotSpec {
        let xy = |p: &CostedPoint| (p.exec_time_s, p.cost);
        let mut series = vec![Series {
            label: "Pareto front".into(),
            style: SeriesStyle::Front,
            points: result.front.iter().map(xy).collect(),
        }];
        if !result.dominated.is_empty() {
            series.push(Series {
                label: "dominated".into(),
                style: SeriesStyle::Scatter,
                points: result.dominated.iter().map(xy).collect(),
            });
        }
        PlotSpec {
            kind: PlotKind::Pareto,
            title: title.to_string(),
            x_label: "Execution time (s)".into(),
            y_label: "Cost (USD)".into(),
            x_scale: AxisScale::Linear,
            series,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    scale: AxisScale,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, scale: AxisScale) -> Axis {
        let mapped: Vec<f64> = values
            .map(|v| match scale {
                AxisScale::Linear => v,
                AxisScale::Log2 => v.log2(),
            })
            .collect();
        let mut lo = mapped.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = mapped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        } else {
            let pad = (hi - lo) * 0.05;
            lo -= pad;
            hi += pad;
        }
        Axis { lo, hi, scale }
    }

    fn map(&self, v: f64) -> f64 {
        let v = match self.scale {
            AxisScale::Linear => v,
            AxisScale::Log2 => v.log2(),
        };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick values in data units.
    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            AxisScale::Log2 => {
                let first = self.lo.ceil() as i32;
                let last = self.hi.floor() as i32;
                (first..=last).map(|e| 2f64.powi(e)).collect()
            }
            AxisScale::Linear => {
                let span = self.hi - self.lo;
                let raw = span / 6.0;
                let magnitude = 10f64.powf(raw.log10().floor());
                let step = [1.0, 2.0, 5.0, 10.0]
                    .iter()
                    .map(|m| m * magnitude)
                    .find(|s| span / s <= 8.0)
                    .unwrap_or(10.0 * magnitude);
                let first = (self.lo / step).ceil() as i64;
                let last = (self.hi / step).floor() as i64;
                (first..=last).map(|i| i as f64 * step).collect()
            }
        }
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e6).contains(&a) {
        format!("{v:.1e}")
    } else if (v - v.round()).abs() < 1e-9 * a.max(1.0) {
        format!("{}", v.round() as i64)
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders a plot as a standalone SVG document.
///
/// Each series becomes one `<g class="series">` holding at most one polyline
/// and one marker group. Output is byte-identical for identical specs.
pub fn render_svg(spec: &PlotSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let all = || spec.series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::new(all().map(|p| p.0), spec.x_scale);
    let ya = Axis::new(all().map(|p| p.1), AxisScale::Linear);
    let plot_w = PLOT_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PLOT_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + xa.map(x) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - ya.map(y)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = PLOT_WIDTH,
        h = PLOT_HEIGHT
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(&spec.title)
    );

    // axes
    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
        MARGIN_LEFT, MARGIN_TOP, plot_w, plot_h
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="x-ticks" text-anchor="middle">"#);
    for t in xa.ticks() {
        let x = px(t);
        let y0 = MARGIN_TOP + plot_h;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            tick_label(t)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="y-ticks" text-anchor="end">"#);
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}">{}</text>"##,
            MARGIN_LEFT,
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        PLOT_HEIGHT - 15.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&spec.y_label)
    );

    // series
    for (i, s) in spec.series.iter().enumerate() {
        let color = match s.style {
            SeriesStyle::Scatter => "#999999",
            _ => PALETTE[i % PALETTE.len()],
        };
        let _ = writeln!(
            svg,
            r#"<g class="series" data-label="{}" data-style="{}">"#,
            escape(&s.label),
            style_name(s.style)
        );
        let line_points: Vec<(f64, f64)> = match s.style {
            SeriesStyle::Front => staircase(&s.points),
            SeriesStyle::Scatter => Vec::new(),
            _ => s.points.clone(),
        };
        if line_points.len() >= 2 {
            let coords: Vec<String> = line_points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let dash = if s.style == SeriesStyle::Predicted {
                r#" stroke-dasharray="6,4""#
            } else {
                ""
            };
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2"{dash} points="{}"/>"#,
                coords.join(" ")
            );
        }
        let fill = if s.style == SeriesStyle::Predicted {
            "white"
        } else {
            color
        };
        let _ = writeln!(svg, r#"<g class="markers" stroke="{color}" fill="{fill}">"#);
        for &(x, y) in &s.points {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5"/>"#, px(x), py(y));
        }
        let _ = writeln!(svg, "</g>");
        let _ = writeln!(svg, "</g>");
    }

    // legend
    let lx = PLOT_WIDTH - MARGIN_RIGHT + 15.0;
    let _ = writeln!(svg, r#"<g class="legend">"#);
    for (i, s) in spec.series.iter().enumerate() {
        let color = match s.style {
            SeriesStyle::Scatter => "#999999",
            _ => PALETTE[i % PALETTE.len()],
        };
        let y = MARGIN_TOP + 10.0 + i as f64 * 20.0;
        let dash = if s.style == SeriesStyle::Predicted {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<g class="legend-entry"><line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            lx + 24.0,
            lx + 30.0,
            y + 4.0,
            escape(&s.label)
        );
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn style_name(style: SeriesStyle) -> &'static str {
    match style {
        SeriesStyle::Measured => "measured",
        SeriesStyle::Predicted => "predicted",
        SeriesStyle::Scatter => "scatter",
        SeriesStyle::Front => "front",
    }
}

/// Step line through front points sorted by x: horizontal, then vertical.
fn staircase(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(sorted.len() * 2);
    for (i, &p) in sorted.iter().enumerate() {
        if i > 0 {
            out.push((p.0, sorted[i - 1].1));
        }
        out.push(p);
    }
    out
}

pub fn emit_plot(spec: &PlotSpec, path: &Path) -> Result<(), ReportError> {
    let svg = render_svg(spec)?;
    write_atomic(path, svg.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::advisor::pareto_front;
    use crate::dataset::{BenchmarkRecord, Scenario, VmSku, METHOD_CROSS_VM};

    fn input() -> AppInput {
        AppInput::new("openfoam", "cells", 1e6)
    }

    fn dataset() -> Dataset {
        let ts = chrono::DateTime::UNIX_EPOCH;
        Dataset::from_records(vec![
            BenchmarkRecord::executed(Scenario::new("HC", 1, 44, input()), 100.0, Provenance::Measured, ts),
            BenchmarkRecord::executed(Scenario::new("HC", 2, 44, input()), 61.0, Provenance::Measured, ts),
            BenchmarkRecord::predicted(Scenario::new("HBv3", 2, 120, input()), 30.5, METHOD_CROSS_VM, ts),
        ])
        .unwrap()
    }

    fn catalog() -> VmCatalog {
        VmCatalog::new(vec![
            VmSku::new("HC", 44, 3.168, "hc"),
            VmSku::new("HBv3", 120, 3.6, "hb"),
        ])
        .unwrap()
    }

    #[test]
    fn dataset_table_has_header_and_rows() {
        let rows = dataset_rows(&dataset(), &catalog(), BillingMode::PerMinute).unwrap();
        let text = table_to_string(&rows).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "app_name,param_name,param_value,sku_name,n_vms,procs_per_vm,exec_time_s,cost_usd,provenance,method"
        );
        assert!(lines[1].starts_with("openfoam,cells,1000000,HBv3,2,120,30.5,"));
        assert_eq!(read_table(&text).unwrap(), rows);
    }

    #[test]
    fn pareto_table_flags_rows() {
        let points = crate::advisor::costed_points(&dataset(), &catalog(), &input(), BillingMode::Exact)
            .unwrap();
        let result = pareto_front(points).unwrap();
        let rows = pareto_rows(&result);
        let text = table_to_string(&rows).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",method,pareto"));
        assert_eq!(text.matches(",front").count(), result.front.len());
        assert_eq!(text.matches(",dominated").count(), result.dominated.len());
        assert_eq!(read_table(&text).unwrap(), rows);
    }

    #[test]
    fn empty_table_is_error() {
        assert!(matches!(table_to_string(&[]), Err(ReportError::Empty)));
    }

    fn count(svg: &str, needle: &str) -> usize {
        svg.matches(needle).count()
    }

    #[test]
    fn time_plot_structure() {
        let spec = PlotSpec::time_vs_vms(&dataset(), &input()).unwrap();
        assert_eq!(spec.series.len(), 2);
        let svg = render_svg(&spec).unwrap();
        assert_eq!(count(&svg, r#"class="series""#), 2);
        assert_eq!(count(&svg, "<polyline"), 1, "single-point series has no line");
        assert_eq!(count(&svg, r#"class="legend-entry""#), 2);
        assert!(svg.contains(r#"data-style="predicted""#));
        assert_eq!(svg, render_svg(&spec).unwrap());
    }

    #[test]
    fn predicted_series_is_dashed() {
        let spec = PlotSpec {
            kind: PlotKind::TimeVsVms,
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_scale: AxisScale::Linear,
            series: vec![
                Series {
                    label: "a".into(),
                    style: SeriesStyle::Measured,
                    points: vec![(1.0, 1.0), (2.0, 2.0)],
                },
                Series {
                    label: "b <&>".into(),
                    style: SeriesStyle::Predicted,
                    points: vec![(1.0, 2.0), (2.0, 3.0)],
                },
            ],
        };
        let svg = render_svg(&spec).unwrap();
        let polylines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(polylines.len(), 2);
        assert!(!polylines[0].contains("dasharray"));
        assert!(polylines[1].contains("dasharray"));
        assert!(svg.contains("b &lt;&amp;&gt;"));
    }

    #[test]
    fn degenerate_ranges_are_padded() {
        let spec = PlotSpec {
            kind: PlotKind::TimeVsVms,
            title: "flat".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            x_scale: AxisScale::Linear,
            series: vec![Series {
                label: "one".into(),
                style: SeriesStyle::Measured,
                points: vec![(4.0, 7.0)],
            }],
        };
        let svg = render_svg(&spec).unwrap();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
        assert_eq!(count(&svg, "<circle"), 1);
        assert_eq!(count(&svg, "<polyline"), 0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = PlotSpec::time_vs_vms(&dataset(), &input()).unwrap();
        spec.series[0].points.clear();
        assert!(render_svg(&spec).is_err());
        spec.series.clear();
        assert!(render_svg(&spec).is_err());
    }

    #[test]
    fn staircase_steps() {
        assert_eq!(
            staircase(&[(3.0, 1.0), (1.0, 5.0)]),
            vec![(1.0, 5.0), (3.0, 5.0), (3.0, 1.0)]
        );
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(16.0), "16");
        assert_eq!(tick_label(0.25), "0.25");
        assert_eq!(tick_label(2.5e7), "2.5e7");
    }
}
