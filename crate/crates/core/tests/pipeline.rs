use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use hpcadvisor::advisor::{recommend, BillingMode};
use hpcadvisor::dataset::{
    AppInput, BenchmarkRecord, Dataset, Provenance, Scenario, VmCatalog, METHOD_CROSS_INPUT,
    METHOD_CROSS_VM,
};
use hpcadvisor::executor::{ExecutionOutcome, Executor, Simulator, SkuPerformance, SyntheticModel};
use hpcadvisor::planner::{
    evaluate, execute_plan, plan, ExecuteOptions, PlanError, PlanOptions, ProcsPolicy,
    ScenarioGrid,
};
use hpcadvisor::report::{render_svg, PlotSpec};
use hpcadvisor::BUNDLED_CATALOG;

fn catalog() -> VmCatalog {
    VmCatalog::from_reader(BUNDLED_CATALOG.as_bytes()).unwrap()
}

fn cells(v: f64) -> AppInput {
    AppInput::new("openfoam", "cells", v)
}

fn stamp() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2024-03-01T12:00:00Z")
        .unwrap()
        .with_timezone(&Utc)
}

fn grid(skus: &[&str], values: &[f64]) -> ScenarioGrid {
    ScenarioGrid {
        sku_names: skus.iter().map(|s| s.to_string()).collect(),
        node_counts: vec![1, 2, 4, 8, 16],
        inputs: values.iter().map(|&v| cells(v)).collect(),
        procs_per_vm: ProcsPolicy::AllCores,
    }
}

fn model(noise: f64, cache: bool) -> SyntheticModel {
    let perf = |t_s: f64, t_p: f64, alpha: f64, gamma: f64| SkuPerformance {
        serial_time_s: t_s,
        parallel_work_s: t_p,
        efficiency_exponent: alpha,
        comm_coeff_s: gamma,
    };
    SyntheticModel {
        reference_input: 1e6,
        skus: BTreeMap::from([
            ("HC".to_string(), perf(12.0, 264_000.0, 0.9, 6.0)),
            ("HBv2".to_string(), perf(8.0, 480_000.0, 0.93, 4.0)),
            ("HBv3".to_string(), perf(6.0, 420_000.0, 0.92, 4.0)),
        ]),
        cache_threshold: cache.then_some(100_000.0),
        cache_speedup: if cache { 1.15 } else { 1.0 },
        noise_sigma: noise,
        seed: 9,
    }
}

fn options(parallelism: usize) -> ExecuteOptions {
    ExecuteOptions {
        parallelism,
        timestamp: stamp(),
        ..Default::default()
    }
}

/// Simulator that fails the listed scenarios.
struct Flaky {
    inner: Simulator,
    fail: Vec<Scenario>,
}

impl Executor for Flaky {
    fn run(&self, scenario: &Scenario, catalog: &VmCatalog) -> ExecutionOutcome {
        if self.fail.contains(scenario) {
            return ExecutionOutcome::failed(scenario.clone(), "node lost");
        }
        self.inner.run(scenario, catalog)
    }

    fn provenance(&self) -> Provenance {
        Provenance::Simulated
    }

    fn name(&self) -> &str {
        "flaky"
    }
}

fn truth_time(sim: &Simulator, sku: &str, n: u32, value: f64) -> f64 {
    let procs = catalog().get(sku).unwrap().cores_per_vm;
    sim.run(&Scenario::new(sku, n, procs, cells(value)), &catalog()).exec_time_s
}

#[test]
fn full_grid_dataset_has_expected_composition() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.02, true)).unwrap();
    let p = plan(&grid(&["HC", "HBv2", "HBv3"], &[1e6, 2e6, 4e6]), &catalog, &PlanOptions::default()).unwrap();
    let report = execute_plan(&p, &sim, &catalog, Dataset::new(), &options(3)).unwrap();
    let ds = &report.dataset;
    assert_eq!(ds.len(), 45);
    assert_eq!(ds.count_by_provenance(Provenance::Simulated), 9);
    assert_eq!(ds.count_by_provenance(Provenance::Predicted), 36);
    let method = |m: &str| ds.records().filter(|r| r.method.as_deref() == Some(m)).count();
    assert_eq!(method(METHOD_CROSS_VM), 6);
    assert_eq!(method(METHOD_CROSS_INPUT), 30);
    assert!(report.failures.is_empty());
    assert_eq!((report.executed_ok, report.predicted_ok), (9, 36));
    assert_eq!(report.fits.keys().collect::<Vec<_>>(), ["HBv3", "HC"]);
    for r in ds.records() {
        r.validate().unwrap();
        assert_eq!(r.timestamp, stamp());
    }
}

#[test]
fn failed_probe_degrades_to_single_point_fit() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.0, false)).unwrap();
    let g = grid(&["HC", "HBv2", "HBv3"], &[1e6, 2e6]);
    let p = plan(&g, &catalog, &PlanOptions::default()).unwrap();
    let lost = Scenario::new("HC", 1, 44, cells(1e6));
    assert!(p.executed.contains(&lost));
    let flaky = Flaky {
        inner: sim.clone(),
        fail: vec![lost.clone()],
    };
    let report = execute_plan(&p, &flaky, &catalog, Dataset::new(), &options(2)).unwrap();

    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].scenario, lost);
    // closed-form single-point ratio at the surviving probe
    let expected = truth_time(&sim, "HC", 16, 1e6) / truth_time(&sim, "HBv2", 16, 1e6);
    let fit = report.fits["HC"];
    assert!(((fit.factor - expected) / expected).abs() < 1e-9, "{fit:?} vs {expected}");

    let filled = report.dataset.get(&lost, Provenance::Predicted).expect("failed probe predicted");
    let baseline_1 = truth_time(&sim, "HBv2", 1, 1e6);
    assert!((filled.exec_time_s / (baseline_1 * expected) - 1.0).abs() < 1e-9);
    assert_eq!(report.dataset.len(), 30);
}

#[test]
fn all_probes_failing_is_fit_error_naming_sku() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.0, false)).unwrap();
    let p = plan(&grid(&["HC", "HBv2"], &[1e6]), &catalog, &PlanOptions::default()).unwrap();
    let flaky = Flaky {
        inner: sim,
        fail: p.executed.iter().filter(|s| s.sku_name == "HC").cloned().collect(),
    };
    match execute_plan(&p, &flaky, &catalog, Dataset::new(), &options(1)) {
        Err(PlanError::FitFailed { sku, .. }) => assert_eq!(sku, "HC"),
        other => panic!("expected fit failure, got {other:?}"),
    }
}

#[test]
fn baseline_failure_is_reported() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.0, false)).unwrap();
    let p = plan(&grid(&["HC", "HBv2"], &[1e6]), &catalog, &PlanOptions::default()).unwrap();
    let flaky = Flaky {
        inner: sim,
        fail: p.executed.iter().filter(|s| s.sku_name == "HBv2").cloned().collect(),
    };
    let err = execute_plan(&p, &flaky, &catalog, Dataset::new(), &options(1)).unwrap_err();
    assert!(matches!(&err, PlanError::BaselineMissing { sku, .. } if sku == "HBv2"));
    assert!(err.to_string().contains("node lost"), "{err}");
}

#[test]
fn nothing_to_predict_gives_executed_results() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.02, true)).unwrap();
    let g = grid(&["HBv3"], &[1e6]);
    let p = plan(&g, &catalog, &PlanOptions::default()).unwrap();
    assert!(p.predicted.is_empty());
    let report = execute_plan(&p, &sim, &catalog, Dataset::new(), &options(4)).unwrap();
    let expected = Dataset::from_records(g.scenarios(&catalog).unwrap().into_iter().map(|s| {
        let t = sim.run(&s, &catalog).exec_time_s;
        BenchmarkRecord::executed(s, t, Provenance::Simulated, stamp())
    }))
    .unwrap();
    assert_eq!(report.dataset.to_json_lines(), expected.to_json_lines());
    assert!(report.fits.is_empty());
}

#[test]
fn existing_records_are_kept() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.0, false)).unwrap();
    let other = Scenario::new("HC", 3, 44, cells(5e5));
    let prior = Dataset::from_records([BenchmarkRecord::executed(other.clone(), 77.0, Provenance::Measured, stamp())]).unwrap();
    let p = plan(&grid(&["HC", "HBv2"], &[1e6]), &catalog, &PlanOptions::default()).unwrap();
    let report = execute_plan(&p, &sim, &catalog, prior, &options(1)).unwrap();
    assert_eq!(report.dataset.len(), 11);
    assert_eq!(report.dataset.get(&other, Provenance::Measured).unwrap().exec_time_s, 77.0);
}

#[test]
fn calibration_is_exact_at_the_calibrated_node_count() {
    let catalog = catalog();
    // κ · [(p/p₀)(A + B/n) + γ log₂ n]: VM types stay proportional, but the
    // communication term does not grow with the input
    let skus = [("HC", 1.0), ("HBv2", 0.6), ("HBv3", 0.45)]
        .iter()
        .map(|&(name, k)| {
            let cores = f64::from(catalog.get(name).unwrap().cores_per_vm);
            let perf = SkuPerformance {
                serial_time_s: k * 5.0,
                parallel_work_s: k * 3000.0 * cores,
                efficiency_exponent: 1.0,
                comm_coeff_s: k * 40.0,
            };
            (name.to_string(), perf)
        })
        .collect();
    let sim = Simulator::new(SyntheticModel {
        reference_input: 1e6,
        skus,
        cache_threshold: None,
        cache_speedup: 1.0,
        noise_sigma: 0.0,
        seed: 0,
    })
    .unwrap();
    let g = grid(&["HC", "HBv2", "HBv3"], &[1e6, 2e6, 4e6]);
    let truth = Dataset::from_records(g.scenarios(&catalog).unwrap().into_iter().map(|s| {
        let t = sim.run(&s, &catalog).exec_time_s;
        BenchmarkRecord::executed(s, t, Provenance::Simulated, stamp())
    }))
    .unwrap();
    let run = |calibrate: bool| {
        let opts = PlanOptions {
            calibrate_inputs: calibrate,
            ..Default::default()
        };
        let p = plan(&g, &catalog, &opts).unwrap();
        let report = execute_plan(&p, &sim, &catalog, Dataset::new(), &options(2)).unwrap();
        (p, evaluate(&report.dataset, &truth).unwrap())
    };
    let (plain_plan, plain) = run(false);
    let (cal_plan, calibrated) = run(true);
    assert_eq!(cal_plan.executed.len(), plain_plan.executed.len() + 2);
    assert_eq!(cal_plan.calibration.len(), 2);
    assert_eq!(calibrated.count(), 34);

    let at_16 = |r: &hpcadvisor::planner::PredictionReport| {
        r.entries
            .iter()
            .filter(|e| e.scenario.n_vms == 16 && e.scenario.input != cells(1e6))
            .map(|e| e.ape)
            .fold(0.0, f64::max)
    };
    assert!(at_16(&plain) > 1.0, "{plain}");
    assert!(at_16(&calibrated) < 1e-9, "{calibrated}");
}

#[test]
fn plots_from_pipeline_are_well_formed() {
    let catalog = catalog();
    let sim = Simulator::new(model(0.02, true)).unwrap();
    let p = plan(&grid(&["HC", "HBv2", "HBv3"], &[1e6, 2e6]), &catalog, &PlanOptions::default()).unwrap();
    let ds = execute_plan(&p, &sim, &catalog, Dataset::new(), &options(2)).unwrap().dataset;
    let billing = BillingMode::PerMinute;
    for input in [cells(1e6), cells(2e6)] {
        let pareto = recommend(&ds, &catalog, &input, billing).unwrap();
        let specs = [
            PlotSpec::time_vs_vms(&ds, &input).unwrap(),
            PlotSpec::cost_vs_vms(&ds, &catalog, &input, billing).unwrap(),
            PlotSpec::pareto(&pareto, "front"),
        ];
        for spec in specs {
            let svg = render_svg(&spec).unwrap();
            let doc = roxmltree::Document::parse(&svg).unwrap();
            let series: Vec<_> = doc
                .descendants()
                .filter(|n| n.attribute("class") == Some("series"))
                .collect();
            assert_eq!(series.len(), spec.series.len());
            for (node, s) in series.iter().zip(&spec.series) {
                assert_eq!(node.attribute("data-label"), Some(s.label.as_str()));
                let lines: Vec<_> = node.children().filter(|c| c.has_tag_name("polyline")).collect();
                assert!(lines.len() <= 1);
                let dashed = lines.iter().any(|l| l.attribute("stroke-dasharray").is_some());
                assert_eq!(dashed, node.attribute("data-style") == Some("predicted"));
                let markers = node
                    .children()
                    .find(|c| c.attribute("class") == Some("markers"))
                    .unwrap();
                assert_eq!(markers.children().filter(|c| c.has_tag_name("circle")).count(), s.points.len());
            }
            let ticks = doc
                .descendants()
                .filter(|n| n.attribute("class") == Some("x-ticks"))
                .flat_map(|n| n.children().filter(|c| c.has_tag_name("text")))
                .count();
            assert!(ticks >= 2);
        }
    }
}
