//! Execution-time curve prediction.
//!
//! Two cases are supported:
//!
//! * **Cross-VM-type**: a target VM type's curve is the source curve times a
//!   scaling factor. The factor minimizes the squared deviation between the
//!   scaled, linearly interpolated source curve and one or two measured
//!   target points, and is found with [`crate::optimizer::minimize`].
//! * **Cross-input**: a curve for a new input value is the known curve times
//!   the ratio of the input values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AppInput, DatasetError, ScalingCurve};
use crate::optimizer::{minimize, OptimizeError, OptimizerConfig};

/// Lower bound on extrapolated times.
pub const EXTRAPOLATION_FLOOR_S: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("{n} VMs outside the curve's range [{min}, {max}]")]
    OutOfRange { n: u32, min: u32, max: u32 },
    #[error("no target points to fit")]
    EmptyTarget,
    #[error("invalid target point ({0}, {1})")]
    InvalidTarget(u32, f64),
    #[error("scaling factor must be positive, got {0}")]
    NonPositiveFactor(f64),
    #[error("input mismatch: curve has {curve}, target has {target}")]
    ParameterMismatch { curve: String, target: String },
    #[error("input parameter `{0}` is configured as non-scaling; refusing to predict")]
    NonScalingParameter(String),
    #[error(transparent)]
    Curve(#[from] DatasetError),
    #[error(transparent)]
    Optimizer(#[from] OptimizeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Extrapolation {
    #[default]
    Forbid,
    /// Extend the nearest segment's slope, clamped at [`EXTRAPOLATION_FLOOR_S`].
    Allow,
}

/// Piecewise-linear execution time at `n` VMs.
pub fn interpolate(curve: &ScalingCurve, n: u32, mode: Extrapolation) -> Result<f64, PredictError> {
    let pts = curve.points();
    let (min, max) = curve.node_range();
    if n < min || n > max {
        if mode == Extrapolation::Forbid || pts.len() == 1 {
            return Err(PredictError::OutOfRange { n, min, max });
        }
        let (a, b) = if n < min {
            (pts[0], pts[1])
        } else {
            (pts[pts.len() - 2], pts[pts.len() - 1])
        };
        let t = segment(a, b, n);
        return Ok(t.max(EXTRAPOLATION_FLOOR_S));
    }
    let idx = pts.partition_point(|p| p.0 < n);
    if pts[idx].0 == n {
        return Ok(pts[idx].1);
    }
    Ok(segment(pts[idx - 1], pts[idx], n))
}

fn segment((n0, t0): (u32, f64), (n1, t1): (u32, f64), n: u32) -> f64 {
    let dn = f64::from(n) - f64::from(n0);
    t0 + dn * (t1 - t0) / (f64::from(n1) - f64::from(n0))
}

/// Result of fitting a cross-VM scaling factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub factor: f64,
    /// Sum of squared deviations at `factor`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Sum of squared deviations `Σ (s·f_i − t_i)²` between a scaled source curve
/// and target points.
pub fn fit_objective(scale: f64, interpolated: &[f64], targets: &[(u32, f64)]) -> f64 {
    interpolated
        .iter()
        .zip(targets)
        .map(|(f, (_, t))| (scale * f - t).powi(2))
        .sum()
}

/// Relative change of the factor per unit of the optimizer's variable.
const FIT_STRETCH: f64 = 1e3;

/// Fits the factor mapping `source` onto the target points.
///
/// BFGS starts from the ratio at the first target point, `s₀ = t₁ / f₁`, and
/// works on `v` with `s = s₀ (1 + M v)`, the objective divided by
/// `M² Σ (s₀ f_i)²`. The minimizer is unchanged, the curvature in `v` is 2 and
/// the finite-difference step in `s` becomes `M` times larger, which matters
/// when the residual dwarfs the curvature. The objective is exactly quadratic
/// in `s`, so central differences lose nothing to truncation. One restart
/// around the first estimate recovers full relative precision when `s₀` is
/// far from the optimum.
pub fn fit_scaling_factor(
    source: &ScalingCurve,
    targets: &[(u32, f64)],
    config: &OptimizerConfig,
) -> Result<ScalingFit, PredictError> {
    let (&(_, t1), _) = targets.split_first().ok_or(PredictError::EmptyTarget)?;
    if let Some(&(n, t)) = targets.iter().find(|(_, t)| !(t.is_finite() && *t > 0.0)) {
        return Err(PredictError::InvalidTarget(n, t));
    }
    let interpolated = targets
        .iter()
        .map(|&(n, _)| interpolate(source, n, Extrapolation::Forbid))
        .collect::<Result<Vec<_>, _>>()?;

    let mut factor = t1 / interpolated[0];
    let mut iterations = 0;
    let mut converged = false;
    for _pass in 0..2 {
        let start = factor;
        let norm: f64 =
            FIT_STRETCH * FIT_STRETCH * interpolated.iter().map(|f| (start * f).powi(2)).sum::<f64>();
        let at = |v: f64| start * (1.0 + FIT_STRETCH * v);
        let objective = |v: &[f64]| fit_objective(at(v[0]), &interpolated, targets) / norm;
        let (v, used, ok) = match minimize(objective, &[0.0], config) {
            Ok(r) => (r.x_min[0], r.iterations, r.converged),
            Err(OptimizeError::Diverged { best }) => (best.x_min[0], best.iterations, false),
            Err(e) => return Err(e.into()),
        };
        iterations += used;
        converged = ok;
        factor = at(v);
        if !(factor.is_finite() && factor > 0.0) || used == 0 {
            break;
        }
    }
    Ok(ScalingFit {
        factor,
        residual: fit_objective(factor, &interpolated, targets),
        iterations,
        converged: converged && factor > 0.0,
    })
}

/// Scales the source curve onto another VM type.
pub fn predict_cross_vm(
    source: &ScalingCurve,
    fit: &ScalingFit,
    target_sku: &str,
) -> Result<ScalingCurve, PredictError> {
    if !(fit.factor.is_finite() && fit.factor > 0.0) {
        return Err(PredictError::NonPositiveFactor(fit.factor));
    }
    let mut curve = source.map_times(|t| t * fit.factor)?;
    curve.sku_name = target_sku.to_string();
    Ok(curve)
}

/// Rescales a curve to a new value of the same input parameter, assuming
/// execution time is proportional to the parameter.
pub fn predict_cross_input(
    curve: &ScalingCurve,
    target: &AppInput,
) -> Result<ScalingCurve, PredictError> {
    if !curve.input.same_parameter(target) {
        return Err(PredictError::ParameterMismatch {
            curve: curve.input.to_string(),
            target: target.to_string(),
        });
    }
    target.validate()?;
    curve.input.validate()?;
    let ratio = target.value / curve.input.value;
    let mut out = curve.map_times(|t| t * ratio)?;
    out.input = target.clone();
    Ok(out)
}

/// How an input parameter affects execution time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputScaling {
    #[default]
    Linear,
    /// No known influence: cross-input prediction is refused.
    None,
}

/// Per-parameter scaling rules; parameters without an entry scale linearly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingRules {
    #[serde(default)]
    pub parameters: BTreeMap<String, InputScaling>,
}

impl ScalingRules {
    pub fn scaling_of(&self, param_name: &str) -> InputScaling {
        self.parameters.get(param_name).copied().unwrap_or_default()
    }

    /// [`predict_cross_input`] gated on the parameter's scaling rule.
    pub fn predict_cross_input(
        &self,
        curve: &ScalingCurve,
        target: &AppInput,
    ) -> Result<ScalingCurve, PredictError> {
        match self.scaling_of(&target.param_name) {
            InputScaling::Linear => predict_cross_input(curve, target),
            InputScaling::None => Err(PredictError::NonScalingParameter(target.param_name.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cells(v: f64) -> AppInput {
        AppInput::new("openfoam", "cells", v)
    }

    fn curve(points: &[(u32, f64)]) -> ScalingCurve {
        ScalingCurve::new("HBv3", cells(1e6), 120, points.to_vec()).unwrap()
    }

    fn sample() -> ScalingCurve {
        curve(&[(1, 100.0), (2, 60.0), (4, 35.0)])
    }

    /// Closed-form least-squares factor, computed independently of the optimizer.
    fn closed_form(source: &ScalingCurve, targets: &[(u32, f64)]) -> f64 {
        let f: Vec<f64> = targets
            .iter()
            .map(|&(n, _)| {
                let pts = source.points();
                let j = pts.iter().position(|p| p.0 >= n).unwrap();
                if pts[j].0 == n {
                    pts[j].1
                } else {
                    let (a, b) = (pts[j - 1], pts[j]);
                    let w = (n - a.0) as f64 / (b.0 - a.0) as f64;
                    a.1 * (1.0 - w) + b.1 * w
                }
            })
            .collect();
        let num: f64 = f.iter().zip(targets).map(|(f, (_, t))| f * t).sum();
        let den: f64 = f.iter().map(|f| f * f).sum();
        num / den
    }

    #[test]
    fn interpolation_examples() {
        let c = sample();
        assert_eq!(interpolate(&c, 2, Extrapolation::Forbid).unwrap(), 60.0);
        assert_eq!(interpolate(&c, 3, Extrapolation::Forbid).unwrap(), 47.5);
        assert!(matches!(
            interpolate(&c, 8, Extrapolation::Forbid),
            Err(PredictError::OutOfRange { n: 8, min: 1, max: 4 })
        ));
    }

    #[test]
    fn extrapolation_extends_end_segments() {
        let c = sample();
        // slope of (2,60)-(4,35) is -12.5 per VM
        assert_eq!(interpolate(&c, 6, Extrapolation::Allow).unwrap(), 10.0);
        assert_eq!(interpolate(&c, 8, Extrapolation::Allow).unwrap(), EXTRAPOLATION_FLOOR_S);
        let c = curve(&[(2, 60.0), (4, 35.0)]);
        assert_eq!(interpolate(&c, 1, Extrapolation::Allow).unwrap(), 72.5);
        let single = curve(&[(4, 35.0)]);
        assert_eq!(interpolate(&single, 4, Extrapolation::Forbid).unwrap(), 35.0);
        assert!(interpolate(&single, 5, Extrapolation::Allow).is_err());
    }

    #[test]
    fn fit_single_point_exact_ratio() {
        let fit = fit_scaling_factor(&sample(), &[(2, 30.0)], &OptimizerConfig::default()).unwrap();
        assert!((fit.factor - 0.5).abs() < 1e-12, "{fit:?}");
        assert!(fit.residual < 1e-20);
        assert!(fit.converged);
    }

    #[test]
    fn fit_two_points_matches_closed_form() {
        let targets = [(1, 80.0), (4, 21.0)];
        let oracle = closed_form(&sample(), &targets);
        assert!((oracle - 8735.0 / 11225.0).abs() < 1e-15);
        let fit = fit_scaling_factor(&sample(), &targets, &OptimizerConfig::default()).unwrap();
        assert!(((fit.factor - oracle) / oracle).abs() <= 1e-6, "{fit:?}");
        assert!((fit.factor - 0.77817).abs() < 1e-5);
        let j = fit_objective(oracle, &[100.0, 35.0], &targets);
        assert!((fit.residual - j).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let cfg = OptimizerConfig::default();
        assert!(matches!(
            fit_scaling_factor(&sample(), &[], &cfg),
            Err(PredictError::EmptyTarget)
        ));
        assert!(matches!(
            fit_scaling_factor(&sample(), &[(8, 10.0)], &cfg),
            Err(PredictError::OutOfRange { .. })
        ));
        assert!(matches!(
            fit_scaling_factor(&sample(), &[(2, -1.0)], &cfg),
            Err(PredictError::InvalidTarget(2, _))
        ));
    }

    #[test]
    fn cross_vm_examples() {
        let src = curve(&[(1, 100.0), (2, 60.0)]);
        let fit = ScalingFit {
            factor: 0.5,
            residual: 0.0,
            iterations: 1,
            converged: true,
        };
        let out = predict_cross_vm(&src, &fit, "HC").unwrap();
        assert_eq!(out.points(), &[(1, 50.0), (2, 30.0)]);
        assert_eq!(out.sku_name, "HC");
        assert_eq!(out.input, src.input);
        assert_eq!(out.procs_per_vm, src.procs_per_vm);

        let identity = ScalingFit { factor: 1.0, ..fit };
        let same = predict_cross_vm(&src, &identity, "HBv2").unwrap();
        assert_eq!(same.points(), src.points());
        assert_eq!(same.sku_name, "HBv2");

        let bad = ScalingFit { factor: -0.1, ..fit };
        assert!(predict_cross_vm(&src, &bad, "HC").is_err());
    }

    #[test]
    fn cross_vm_with_fitted_factor() {
        let src = sample();
        let fit = fit_scaling_factor(&src, &[(1, 80.0), (4, 21.0)], &OptimizerConfig::default())
            .unwrap();
        let out = predict_cross_vm(&src, &fit, "HC").unwrap();
        let expected = [(1, 77.817), (2, 46.690), (4, 27.236)];
        for (got, want) in out.points().iter().zip(expected) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 5e-4, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn cross_input_examples() {
        let c = curve(&[(1, 100.0), (2, 60.0)]);
        let out = predict_cross_input(&c, &cells(2e6)).unwrap();
        assert_eq!(out.points(), &[(1, 200.0), (2, 120.0)]);
        assert_eq!(out.input, cells(2e6));
        assert_eq!(predict_cross_input(&c, &cells(1e6)).unwrap(), c);
        let atoms = AppInput::new("openfoam", "atoms", 2e6);
        assert!(matches!(
            predict_cross_input(&c, &atoms),
            Err(PredictError::ParameterMismatch { .. })
        ));
        assert!(predict_cross_input(&c, &cells(0.0)).is_err());
    }

    #[test]
    fn scaling_rules_gate_cross_input() {
        let c = curve(&[(1, 100.0), (2, 60.0)]);
        let mut rules = ScalingRules::default();
        assert!(rules.predict_cross_input(&c, &cells(3e6)).is_ok());
        rules.parameters.insert("cells".into(), InputScaling::None);
        assert!(matches!(
            rules.predict_cross_input(&c, &cells(3e6)),
            Err(PredictError::NonScalingParameter(_))
        ));
    }

    fn arb_curve() -> impl Strategy<Value = ScalingCurve> {
        prop::collection::btree_map(1u32..64, 1.0f64..1e4, 3..=8).prop_map(|m| {
            ScalingCurve::new("HBv3", cells(1e6), 120, m.into_iter().collect()).unwrap()
        })
    }

    fn arb_instance() -> impl Strategy<Value = (ScalingCurve, Vec<(u32, f64)>)> {
        arb_curve().prop_flat_map(|c| {
            let (lo, hi) = c.node_range();
            let targets = prop::collection::vec((lo..=hi, 1.0f64..1e4), 1..=3);
            (Just(c), targets)
        })
    }

    proptest! {
        #[test]
        fn knots_are_exact(c in arb_curve()) {
            for &(n, t) in c.points() {
                prop_assert_eq!(interpolate(&c, n, Extrapolation::Forbid).unwrap(), t);
            }
        }

        #[test]
        fn fit_agrees_with_closed_form((src, targets) in arb_instance()) {
            let fit = fit_scaling_factor(&src, &targets, &OptimizerConfig::default()).unwrap();
            let oracle = closed_form(&src, &targets);
            prop_assert!(((fit.factor - oracle) / oracle).abs() <= 1e-6);
        }

        #[test]
        fn exact_recovery((src, targets) in arb_instance(), kappa in 0.05f64..20.0) {
            let targets: Vec<(u32, f64)> = targets
                .iter()
                .map(|&(n, _)| (n, kappa * interpolate(&src, n, Extrapolation::Forbid).unwrap()))
                .collect();
            let fit = fit_scaling_factor(&src, &targets, &OptimizerConfig::default()).unwrap();
            prop_assert!(((fit.factor - kappa) / kappa).abs() <= 1e-9);
            prop_assert!(fit.residual <= 1e-9);
        }

        #[test]
        fn source_scale_invariance((src, targets) in arb_instance(), c in 0.01f64..100.0) {
            let cfg = OptimizerConfig::default();
            let scaled = src.map_times(|t| t * c).unwrap();
            let a = fit_scaling_factor(&src, &targets, &cfg).unwrap();
            let b = fit_scaling_factor(&scaled, &targets, &cfg).unwrap();
            prop_assert!((b.factor * c / a.factor - 1.0).abs() <= 1e-9);
            let pa = predict_cross_vm(&src, &a, "HC").unwrap();
            let pb = predict_cross_vm(&scaled, &b, "HC").unwrap();
            for (x, y) in pa.points().iter().zip(pb.points()) {
                prop_assert!((x.1 / y.1 - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn cross_input_composes(c in arb_curve(), p1 in 1e3f64..1e8, p2 in 1e3f64..1e8) {
            let via = predict_cross_input(&predict_cross_input(&c, &cells(p1)).unwrap(), &cells(p2)).unwrap();
            let direct = predict_cross_input(&c, &cells(p2)).unwrap();
            for (x, y) in via.points().iter().zip(direct.points()) {
                prop_assert_eq!(x.0, y.0);
                prop_assert!((x.1 / y.1 - 1.0).abs() <= 1e-12);
            }
        }
    }
}
