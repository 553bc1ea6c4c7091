//! Accelerated proximal gradient solver with constant step size.
//!
//! Minimizes `f(x) + g(x)` where `f` is smooth with an `L`-Lipschitz
//! gradient and `g` has a computable proximal operator. The iteration is
//!
//! ```text
//! x_i     = prox_{g/L}( y_i - (1/L) grad f(y_i) )
//! t_{i+1} = (1 + sqrt(1 + 4 t_i^2)) / 2
//! y_{i+1} = x_i + ((t_i - 1) / t_{i+1}) (x_i - x_{i-1})
//! ```
//!
//! starting from `y_1 = x_0`, `t_1 = 1`. The solver stops when the relative
//! iterate change drops below `tol` or after `max_iters` iterations.

use ndarray::Array2;
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FistaError {
    #[error("non-finite {stage} at iteration {iteration}")]
    NonFinite { iteration: usize, stage: &'static str },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// A problem the solver can run on: smooth gradient, prox of the non-smooth
/// part, and a Lipschitz upper bound. The optional objective is only used
/// for monitoring.
pub trait FistaProblem {
    fn gradient(&self, point: &Array2<f64>) -> Array2<f64>;

    /// Proximal operator of `g` scaled by `step = 1/L`.
    fn prox(&self, point: Array2<f64>, step: f64) -> Array2<f64>;

    /// Upper bound `L` on the Lipschitz constant of the gradient; must be
    /// positive and finite.
    fn lipschitz_bound(&self) -> f64;

    fn objective(&self, _point: &Array2<f64>) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct FistaConfig {
    pub max_iters: usize,
    /// Relative iterate-change tolerance.
    pub tol: f64,
    /// Record the objective every this many iterations; 0 disables the trace.
    pub monitor_every: usize,
}

impl Default for FistaConfig {
    fn default() -> FistaConfig {
        FistaConfig {
            max_iters: 2000,
            tol: 1e-6,
            monitor_every: 10,
        }
    }
}

impl FistaConfig {
    pub fn validate(&self) -> Result<(), FistaError> {
        if self.max_iters == 0 {
            return Err(FistaError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(FistaError::InvalidConfig("tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub final_relative_change: f64,
    pub wall_time_s: f64,
}

/// Momentum recurrence, line 2 of the iteration.
pub fn theta_next(theta: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn all_finite(m: &Array2<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Runs the iteration from `x0` until the stopping rule fires. Returns the
/// last `x` iterate and a report.
pub fn solve<P: FistaProblem>(
    problem: &P,
    x0: Array2<f64>,
    config: &FistaConfig,
) -> Result<(Array2<f64>, SolveReport), FistaError> {
    config.validate()?;
    let lipschitz = problem.lipschitz_bound();
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(FistaError::InvalidConfig(format!(
            "lipschitz_bound must be positive and finite, got {lipschitz}"
        )));
    }
    let step = 1.0 / lipschitz;
    let started = Instant::now();

    let mut trace = Vec::new();
    let monitoring = config.monitor_every > 0;
    if monitoring {
        if let Some(obj) = problem.objective(&x0) {
            trace.push(obj);
        }
    }

    let mut x_prev = x0.clone();
    let mut y = x0;
    let mut theta = 1.0;
    let mut iterations = 0;
    let mut stop_reason = StopReason::MaxIters;
    let mut rel_change = f64::INFINITY;

    for i in 1..=config.max_iters {
        iterations = i;
        let grad = problem.gradient(&y);
        if !all_finite(&grad) {
            return Err(FistaError::NonFinite {
                iteration: i,
                stage: "gradient",
            });
        }
        let mut point = y;
        point.zip_mut_with(&grad, |p, &g| *p -= step * g);
        let x = problem.prox(point, step);
        if !all_finite(&x) {
            return Err(FistaError::NonFinite {
                iteration: i,
                stage: "prox output",
            });
        }

        let theta_new = theta_next(theta);
        let momentum = (theta - 1.0) / theta_new;
        let mut diff_norm_sq = 0.0;
        let mut y_next = x.clone();
        y_next.zip_mut_with(&x_prev, |yv, &xp| {
            let d = *yv - xp;
            diff_norm_sq += d * d;
            *yv += momentum * d;
        });
        rel_change = diff_norm_sq.sqrt() / frobenius(&x_prev).max(f64::EPSILON);

        if monitoring && i % config.monitor_every == 0 {
            if let Some(obj) = problem.objective(&x) {
                trace.push(obj);
            }
        }

        x_prev = x;
        y = y_next;
        theta = theta_new;

        if rel_change < config.tol {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }

    let report = SolveReport {
        iterations,
        objective_trace: trace,
        stop_reason,
        final_relative_change: rel_change,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((x_prev, report))
}
