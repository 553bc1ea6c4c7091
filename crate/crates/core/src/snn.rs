//! Nuclear-norm penalized reconstruction.
//!
//! Solves
//!
//! ```text
//! min_X  0.5 ||Y_I - X_I||_F^2  +  (lambda/2) ||X D||_F^2  +  mu ||X||_*
//! ```
//!
//! by FISTA: the quadratic data fit plus the gradient-energy term form the
//! smooth part with gradient `scatter(X_I - Y_I) - lambda * X L` and
//! Lipschitz bound `1 + 8 lambda`; the nuclear norm is handled by
//! soft-thresholding the singular values at `mu / L` each step.
//!
//! [`snn_tune`] picks `(lambda, mu)` so that the per-entry data-fit residual
//! on the measured pixels matches a noise-variance estimate: three
//! successive 1-D searches (spatial alone, spectral alone, then a common
//! rescaling) on a log grid, each refined by bisection on the signed
//! residual.

use crate::fista::{self, FistaConfig, FistaProblem, SolveReport};
use crate::gradient::GradientOperator;
use crate::image::{mean_fill, scatter, SamplingMask, SpectrumImage};
use crate::linalg;
use ndarray::{s, Array2, ArrayView2};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnnError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite measurements")]
    NonFiniteInput,
    #[error(transparent)]
    Solver(#[from] fista::FistaError),
    #[error(transparent)]
    Core(#[from] crate::image::CoreError),
}

/// Spatial (`lambda`) and spectral (`mu`) regularization weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnnParams {
    pub lambda: f64,
    pub mu: f64,
}

impl SnnParams {
    pub fn new(lambda: f64, mu: f64) -> Result<SnnParams, SnnError> {
        if !(lambda >= 0.0 && lambda.is_finite()) || !(mu >= 0.0 && mu.is_finite()) {
            return Err(SnnError::InvalidParams(format!(
                "lambda and mu must be finite and nonnegative, got ({lambda}, {mu})"
            )));
        }
        Ok(SnnParams { lambda, mu })
    }
}

/// Soft-thresholds the singular values of `m` at `threshold`:
/// `U diag(max(s_i - threshold, 0)) V^T`.
///
/// The full singular spectrum comes from the eigendecomposition of the
/// small-side Gram matrix, which yields every singular value exactly and
/// avoids forming the long side's singular vectors explicitly.
pub fn nuclear_prox(m: &ArrayView2<f64>, threshold: f64) -> Result<Array2<f64>, SnnError> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(SnnError::InvalidParams(format!(
            "threshold must be finite and nonnegative, got {threshold}"
        )));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(SnnError::NonFiniteInput);
    }
    Ok(nuclear_prox_inner(m, threshold))
}

fn nuclear_prox_inner(m: &ArrayView2<f64>, threshold: f64) -> Array2<f64> {
    if threshold == 0.0 {
        return m.to_owned();
    }
    let (rows, cols) = m.dim();
    if rows <= cols {
        let gram = m.dot(&m.t());
        let (vals, vecs) = linalg::eigh_descending(&gram.view());
        let factors = shrink_factors(&vals, threshold);
        let k = factors.len();
        if k == 0 {
            return Array2::zeros((rows, cols));
        }
        let uk = vecs.slice(s![.., ..k]);
        let mut b = uk.t().dot(m);
        for (mut row, &f) in b.rows_mut().into_iter().zip(&factors) {
            row.mapv_inplace(|v| v * f);
        }
        uk.dot(&b)
    } else {
        let gram = m.t().dot(m);
        let (vals, vecs) = linalg::eigh_descending(&gram.view());
        let factors = shrink_factors(&vals, threshold);
        let k = factors.len();
        if k == 0 {
            return Array2::zeros((rows, cols));
        }
        let vk = vecs.slice(s![.., ..k]);
        let mut b = m.dot(&vk);
        for (mut col, &f) in b.columns_mut().into_iter().zip(&factors) {
            col.mapv_inplace(|v| v * f);
        }
        b.dot(&vk.t())
    }
}

/// Multipliers `max(s - t, 0) / s` for the leading singular values that
/// survive the threshold (the spectrum is descending, so survivors are a
/// prefix).
fn shrink_factors(gram_eigs: &[f64], threshold: f64) -> Vec<f64> {
    gram_eigs
        .iter()
        .map(|&v| v.max(0.0).sqrt())
        .take_while(|&s| s > threshold)
        .map(|s| (s - threshold) / s)
        .collect()
}

/// The smooth-plus-prox splitting behind [`snn_reconstruct`].
pub struct SnnProblem<'a> {
    measurements: &'a Array2<f64>,
    mask: &'a SamplingMask,
    op: GradientOperator,
    params: SnnParams,
}

impl<'a> SnnProblem<'a> {
    pub fn new(
        measurements: &'a Array2<f64>,
        mask: &'a SamplingMask,
        height: usize,
        width: usize,
        params: SnnParams,
    ) -> Result<SnnProblem<'a>, SnnError> {
        if mask.np() != height * width {
            return Err(SnnError::DimensionMismatch(format!(
                "mask covers {} pixels, grid is {}x{}",
                mask.np(),
                height,
                width
            )));
        }
        if measurements.ncols() != mask.ns() {
            return Err(SnnError::DimensionMismatch(format!(
                "{} measurement columns for {} mask indices",
                measurements.ncols(),
                mask.ns()
            )));
        }
        if !measurements.iter().all(|v| v.is_finite()) {
            return Err(SnnError::NonFiniteInput);
        }
        Ok(SnnProblem {
            measurements,
            mask,
            op: GradientOperator::new(height, width),
            params,
        })
    }

    /// Smooth part `0.5 ||Y_I - X_I||^2 + (lambda/2) ||X D||^2`.
    pub fn smooth_objective(&self, x: &Array2<f64>) -> f64 {
        let mut fit = 0.0;
        for (n, &p) in self.mask.indices().iter().enumerate() {
            for b in 0..x.nrows() {
                let d = x[[b, p]] - self.measurements[[b, n]];
                fit += d * d;
            }
        }
        let energy = if self.params.lambda > 0.0 {
            let g = self.op.apply_gradient(&x.view()).expect("checked shape");
            g.iter().map(|v| v * v).sum::<f64>()
        } else {
            0.0
        };
        0.5 * fit + 0.5 * self.params.lambda * energy
    }
}

impl FistaProblem for SnnProblem<'_> {
    fn gradient(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut g = if self.params.lambda != 0.0 {
            let mut lap = self.op.apply_laplacian(&x.view()).expect("checked shape");
            lap.mapv_inplace(|v| -self.params.lambda * v);
            lap
        } else {
            Array2::zeros(x.raw_dim())
        };
        for (n, &p) in self.mask.indices().iter().enumerate() {
            let mut col = g.column_mut(p);
            for b in 0..x.nrows() {
                col[b] += x[[b, p]] - self.measurements[[b, n]];
            }
        }
        g
    }

    fn prox(&self, point: Array2<f64>, step: f64) -> Array2<f64> {
        if self.params.mu == 0.0 {
            point
        } else {
            nuclear_prox_inner(&point.view(), self.params.mu * step)
        }
    }

    fn lipschitz_bound(&self) -> f64 {
        1.0 + 8.0 * self.params.lambda
    }

    fn objective(&self, x: &Array2<f64>) -> Option<f64> {
        let nuc = if self.params.mu > 0.0 {
            self.params.mu * linalg::nuclear_norm(&x.view())
        } else {
            0.0
        };
        Some(self.smooth_objective(x) + nuc)
    }
}

/// Per-entry data-fit residual `||Y_I - X_I||_F^2 / (ns * bands)`.
pub fn masked_fit_mse(x: &Array2<f64>, measurements: &Array2<f64>, mask: &SamplingMask) -> f64 {
    let mut acc = 0.0;
    for (n, &p) in mask.indices().iter().enumerate() {
        for b in 0..x.nrows() {
            let d = x[[b, p]] - measurements[[b, n]];
            acc += d * d;
        }
    }
    acc / (mask.ns() as f64 * x.nrows() as f64)
}

/// Reconstructs a full image from masked measurements. `shape` is
/// `(bands, height, width)`. Starts from the measured columns with the mean
/// measured spectrum elsewhere.
pub fn snn_reconstruct(
    measurements: &Array2<f64>,
    mask: &SamplingMask,
    shape: (usize, usize, usize),
    params: &SnnParams,
    config: &FistaConfig,
) -> Result<(SpectrumImage, SolveReport), SnnError> {
    let (bands, height, width) = shape;
    if measurements.nrows() != bands {
        return Err(SnnError::DimensionMismatch(format!(
            "{} measurement rows, shape says {} bands",
            measurements.nrows(),
            bands
        )));
    }
    SnnParams::new(params.lambda, params.mu)?;
    let problem = SnnProblem::new(measurements, mask, height, width, *params)?;
    let x0 = mean_fill(&measurements.view(), mask);
    let (x, report) = fista::solve(&problem, x0, config)?;
    Ok((SpectrumImage::new(height, width, x)?, report))
}

/// One evaluation of the tuning criterion: the parameter value and the
/// signed residual `fit_mse - sigma2_hat` at the solution for it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchPoint {
    pub param: f64,
    pub residual: f64,
}

/// Outcome of the three 1-D searches.
#[derive(Debug, Clone, Serialize)]
pub struct TuningState {
    pub lambda_circ: f64,
    pub mu_circ: f64,
    pub c_circ: f64,
    pub lambda_star: f64,
    pub mu_star: f64,
    pub sigma2_hat: f64,
    /// Data-fit MSE at the final `(lambda_star, mu_star)` solution.
    pub final_residual_mse: f64,
    pub lambda_trace: Vec<SearchPoint>,
    pub mu_trace: Vec<SearchPoint>,
    pub c_trace: Vec<SearchPoint>,
    /// Set when the corresponding search never saw the residual change sign
    /// and fell back to the grid argmin.
    pub lambda_no_sign_change: bool,
    pub mu_no_sign_change: bool,
    pub c_no_sign_change: bool,
}

const GRID_DECADE_MIN: f64 = 1e-6;
const GRID_POINTS_PER_DECADE: usize = 7;
const GRID_DECADES: usize = 10;
const BISECTION_STEPS: usize = 20;

fn search_grid() -> Vec<f64> {
    let total = GRID_DECADES * GRID_POINTS_PER_DECADE;
    (0..=total)
        .map(|k| GRID_DECADE_MIN * 10f64.powf(k as f64 / GRID_POINTS_PER_DECADE as f64))
        .collect()
}

/// Locates the zero of the signed residual over the log grid: binary search
/// for the sign change (the residual grows with the regularization
/// strength), then log-space bisection. Returns the evaluated parameter
/// with the smallest squared residual, the trace, and whether the residual
/// never changed sign over the grid range.
fn search_1d<E>(mut eval: E) -> Result<(f64, Vec<SearchPoint>, bool), SnnError>
where
    E: FnMut(f64) -> Result<f64, SnnError>,
{
    let grid = search_grid();
    let mut trace: Vec<SearchPoint> = Vec::new();
    let mut probe = |param: f64, trace: &mut Vec<SearchPoint>| -> Result<f64, SnnError> {
        let residual = eval(param)?;
        trace.push(SearchPoint { param, residual });
        Ok(residual)
    };

    let first = probe(grid[0], &mut trace)?;
    if first >= 0.0 {
        // even the weakest regularization overshoots the noise level
        return Ok((grid[0], trace, true));
    }
    let last_idx = grid.len() - 1;
    let last = probe(grid[last_idx], &mut trace)?;
    if last < 0.0 {
        return Ok((grid[last_idx], trace, true));
    }

    let (mut lo, mut hi) = (0usize, last_idx);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        let r = probe(grid[mid], &mut trace)?;
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (mut a, mut b) = (grid[lo], grid[hi]);
    for _ in 0..BISECTION_STEPS {
        let mid = (0.5 * (a.ln() + b.ln())).exp();
        let r = probe(mid, &mut trace)?;
        if r < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }

    let best = trace
        .iter()
        .min_by(|x, y| {
            (x.residual * x.residual)
                .partial_cmp(&(y.residual * y.residual))
                .expect("finite residuals")
        })
        .expect("non-empty trace")
        .param;
    Ok((best, trace, false))
}

/// Solves for successive parameter values, warm-starting each solve from
/// the previous solution.
struct CriterionEvaluator<'a> {
    measurements: &'a Array2<f64>,
    mask: &'a SamplingMask,
    shape: (usize, usize, usize),
    sigma2_hat: f64,
    config: FistaConfig,
    warm: Option<Array2<f64>>,
}

impl<'a> CriterionEvaluator<'a> {
    fn new(
        measurements: &'a Array2<f64>,
        mask: &'a SamplingMask,
        shape: (usize, usize, usize),
        sigma2_hat: f64,
        config: &FistaConfig,
    ) -> CriterionEvaluator<'a> {
        let config = FistaConfig {
            monitor_every: 0,
            ..config.clone()
        };
        CriterionEvaluator {
            measurements,
            mask,
            shape,
            sigma2_hat,
            config,
            warm: None,
        }
    }

    fn eval(&mut self, lambda: f64, mu: f64) -> Result<f64, SnnError> {
        let params = SnnParams::new(lambda, mu)?;
        let problem = SnnProblem::new(
            self.measurements,
            self.mask,
            self.shape.1,
            self.shape.2,
            params,
        )?;
        let x0 = match &self.warm {
            Some(w) => w.clone(),
            None => mean_fill(&self.measurements.view(), self.mask),
        };
        let (x, _) = fista::solve(&problem, x0, &self.config)?;
        let mse = masked_fit_mse(&x, self.measurements, self.mask);
        self.warm = Some(x);
        Ok(mse - self.sigma2_hat)
    }
}

/// Three-stage hyperparameter search: `lambda_circ` minimizing the criterion
/// with the spectral term off, `mu_circ` with the spatial term off, then a
/// common factor `c_circ` along the ray `(c lambda_circ, c mu_circ)`.
/// Returns `(c_circ * lambda_circ, c_circ * mu_circ)`.
pub fn snn_tune(
    measurements: &Array2<f64>,
    mask: &SamplingMask,
    shape: (usize, usize, usize),
    sigma2_hat: f64,
    config: &FistaConfig,
) -> Result<(SnnParams, TuningState), SnnError> {
    if !(sigma2_hat > 0.0 && sigma2_hat.is_finite()) {
        return Err(SnnError::InvalidParams(format!(
            "sigma2_hat must be positive and finite, got {sigma2_hat}"
        )));
    }

    let mut lambda_eval = CriterionEvaluator::new(measurements, mask, shape, sigma2_hat, config);
    let (lambda_circ, lambda_trace, lambda_warn) = search_1d(|l| lambda_eval.eval(l, 0.0))?;

    let mut mu_eval = CriterionEvaluator::new(measurements, mask, shape, sigma2_hat, config);
    let (mu_circ, mu_trace, mu_warn) = search_1d(|m| mu_eval.eval(0.0, m))?;

    let mut c_eval = CriterionEvaluator::new(measurements, mask, shape, sigma2_hat, config);
    let (c_circ, c_trace, c_warn) = search_1d(|c| c_eval.eval(c * lambda_circ, c * mu_circ))?;

    let params = SnnParams::new(c_circ * lambda_circ, c_circ * mu_circ)?;
    let (x_final, _) = snn_reconstruct(measurements, mask, shape, &params, config)?;
    let final_residual_mse = masked_fit_mse(x_final.data(), measurements, mask);

    let state = TuningState {
        lambda_circ,
        mu_circ,
        c_circ,
        lambda_star: params.lambda,
        mu_star: params.mu,
        sigma2_hat,
        final_residual_mse,
        lambda_trace,
        mu_trace,
        c_trace,
        lambda_no_sign_change: lambda_warn,
        mu_no_sign_change: mu_warn,
        c_no_sign_change: c_warn,
    };
    Ok((params, state))
}

/// Mean-fill baseline as a [`SpectrumImage`] (measured columns kept, mean
/// measured spectrum elsewhere); also the solver's starting point.
pub fn mean_fill_image(
    measurements: &Array2<f64>,
    mask: &SamplingMask,
    height: usize,
    width: usize,
) -> Result<SpectrumImage, SnnError> {
    if measurements.ncols() != mask.ns() || mask.np() != height * width {
        return Err(SnnError::DimensionMismatch(
            "measurements/mask/grid disagree".into(),
        ));
    }
    Ok(SpectrumImage::new(
        height,
        width,
        mean_fill(&measurements.view(), mask),
    )?)
}

/// Zero-fill baseline: measured columns kept, zeros elsewhere.
pub fn zero_fill_image(
    measurements: &Array2<f64>,
    mask: &SamplingMask,
    height: usize,
    width: usize,
) -> Result<SpectrumImage, SnnError> {
    if measurements.ncols() != mask.ns() || mask.np() != height * width {
        return Err(SnnError::DimensionMismatch(
            "measurements/mask/grid disagree".into(),
        ));
    }
    Ok(SpectrumImage::new(
        height,
        width,
        scatter(&measurements.view(), mask),
    )?)
}
