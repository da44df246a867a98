//! Resource-selection advice for HPC workloads on cloud VMs.
//!
//! Given a VM catalog and sparse benchmark data, the crate predicts
//! execution-time curves across VM types and application input sizes,
//! costs every configuration, and reports the Pareto front of
//! (execution time, cost). The [`planner`] decides which scenarios of a
//! grid actually have to be run so the rest can be predicted.
//!
//! ```
//! use hpcadvisor::dataset::{AppInput, ScalingCurve};
//! use hpcadvisor::optimizer::OptimizerConfig;
//! use hpcadvisor::predictor::{fit_scaling_factor, predict_cross_vm};
//!
//! let input = AppInput::new("openfoam", "cells", 1e6);
//! let source = ScalingCurve::new("HBv3", input, 120, vec![(1, 100.0), (2, 60.0), (4, 35.0)]).unwrap();
//! let fit = fit_scaling_factor(&source, &[(2, 30.0)], &OptimizerConfig::default()).unwrap();
//! assert!((fit.factor - 0.5).abs() < 1e-9);
//! let hc = predict_cross_vm(&source, &fit, "HC").unwrap();
//! assert!((hc.time_at(4).unwrap() - 17.5).abs() < 1e-9);
//! ```

#![forbid(unsafe_code)]

pub mod advisor;
pub mod cli;
pub mod dataset;
pub mod executor;
pub mod optimizer;
pub mod planner;
pub mod predictor;
pub mod report;

/// Bundled catalog with the HC, HBv2 and HBv3 VM types.
pub const BUNDLED_CATALOG: &str = include_str!("../data/catalog.jsonl");
