//! BFGS quasi-Newton minimization with central finite-difference gradients
//! and a backtracking Armijo line search.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Stop once the gradient's Euclidean norm is at or below this value.
    pub grad_tolerance: f64,
    pub max_iterations: usize,
    /// Step for central differences.
    pub fd_step: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            grad_tolerance: 1e-8,
            max_iterations: 200,
            fd_step: 1e-6,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.grad_tolerance) || !positive(self.fd_step) {
            return Err(OptimizeError::InvalidConfig(
                "grad_tolerance and fd_step must be positive".into(),
            ));
        }
        if self.max_iterations == 0 || self.max_backtracks == 0 {
            return Err(OptimizeError::InvalidConfig(
                "iteration limits must be positive".into(),
            ));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(OptimizeError::InvalidConfig("armijo_c1 must be in (0, 1)".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(OptimizeError::InvalidConfig(
                "backtrack_factor must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub x_min: Vec<f64>,
    pub f_min: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("empty starting point")]
    EmptyStart,
    /// A non-finite gradient was hit at an accepted iterate.
    #[error("objective diverged after {} iterations", best.iterations)]
    Diverged { best: OptimizeResult },
}

/// Central-difference gradient.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let xi = x[i];
            probe[i] = xi + step;
            let fp = f(&probe);
            probe[i] = xi - step;
            let fm = f(&probe);
            probe[i] = xi;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

/// Minimizes `f` from `x0` with BFGS.
///
/// Every accepted step satisfies the Armijo condition, so objective values
/// along accepted iterates never increase. The inverse-Hessian update is
/// skipped when the curvature `sᵀy` is not safely positive. If the line search
/// cannot find a decrease, the current iterate is returned with
/// `converged = false`.
pub fn minimize<F>(f: F, x0: &[f64], config: &OptimizerConfig) -> Result<OptimizeResult, OptimizeError>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    if x0.is_empty() {
        return Err(OptimizeError::EmptyStart);
    }
    let dim = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = f(x.as_slice());
    if !fx.is_finite() {
        return Err(OptimizeError::NonFiniteStart);
    }
    let mut grad = DVector::from_vec(fd_gradient(&f, x.as_slice(), config.fd_step));
    let mut h_inv = DMatrix::<f64>::identity(dim, dim);

    let snapshot = |x: &DVector<f64>, fx: f64, g: &DVector<f64>, iterations: usize, converged: bool| {
        OptimizeResult {
            x_min: x.as_slice().to_vec(),
            f_min: fx,
            iterations,
            converged,
            gradient_norm: g.norm(),
        }
    };

    for iteration in 0..config.max_iterations {
        let gnorm = grad.norm();
        if !gnorm.is_finite() {
            return Err(OptimizeError::Diverged {
                best: snapshot(&x, fx, &grad, iteration, false),
            });
        }
        if gnorm <= config.grad_tolerance {
            return Ok(snapshot(&x, fx, &grad, iteration, true));
        }

        let mut direction = -(&h_inv * &grad);
        let mut slope = grad.dot(&direction);
        if slope.is_nan() || slope >= 0.0 {
            // not a descent direction: restart from steepest descent
            h_inv = DMatrix::identity(dim, dim);
            direction = -grad.clone();
            slope = -gnorm * gnorm;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let candidate = &x + &direction * step;
            let fc = f(candidate.as_slice());
            if fc.is_finite() && fc <= fx + config.armijo_c1 * step * slope {
                accepted = Some((candidate, fc));
                break;
            }
            step *= config.backtrack_factor;
        }
        let Some((x_new, f_new)) = accepted else {
            return Ok(snapshot(&x, fx, &grad, iteration, false));
        };

        let grad_new = DVector::from_vec(fd_gradient(&f, x_new.as_slice(), config.fd_step));
        let s = &x_new - &x;
        let y = &grad_new - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let identity = DMatrix::<f64>::identity(dim, dim);
            let left = &identity - (&s * y.transpose()) * rho;
            let right = &identity - (&y * s.transpose()) * rho;
            h_inv = &left * &h_inv * &right + (&s * s.transpose()) * rho;
        }

        x = x_new;
        fx = f_new;
        grad = grad_new;
    }

    let gnorm = grad.norm();
    if !gnorm.is_finite() {
        return Err(OptimizeError::Diverged {
            best: snapshot(&x, fx, &grad, config.max_iterations, false),
        });
    }
    let converged = gnorm <= config.grad_tolerance;
    Ok(snapshot(&x, fx, &grad, config.max_iterations, converged))
}
