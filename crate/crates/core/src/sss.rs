//! Subspace-constrained reconstruction.
//!
//! The measured pixel spectra are assumed to live in a low-dimensional
//! subspace. [`estimate_subspace`] identifies it from the uncentered sample
//! covariance `(1/ns) Y_I Y_I^T` of the measurements: the eigenvalues are
//! bias-corrected with the Stein estimator (needed when `ns` is of the
//! same order as the band count), repaired into a non-increasing sequence
//! by isotonizing adjacent pools, and the bottom pooled block becomes the
//! noise-variance estimate. Eigenvalues strictly above it span the signal
//! subspace of dimension `R`; their excess over the noise level sets
//! per-row weights `w_b = sigma2 / (d2_b - sigma2)`.
//!
//! [`sss_reconstruct`] then solves, over the `R x np` coefficient matrix
//! `S` expressed in that basis,
//!
//! ```text
//! min_S  (1/2R) ||S D||_F^2 + (lambda/2) sum_b w_b ||S_b||^2
//! s.t.   (1/R) ||H^T y_n - s_n||^2 <= sigma2     for every measured pixel n
//! ```
//!
//! by FISTA, where the constraint prox is a per-pixel projection onto a
//! Euclidean ball of radius `sqrt(R) * sigma`. The reconstruction is
//! `X = H_{1:R} S`.

use crate::fista::{self, FistaConfig, FistaProblem, SolveReport};
use crate::gradient::GradientOperator;
use crate::image::{SamplingMask, SpectrumImage};
use crate::linalg;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SssError {
    #[error("degenerate covariance: measurements are all zero")]
    DegenerateCovariance,
    #[error("no signal subspace detected: all eigenvalues pooled to the noise level")]
    NoSignalSubspace,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Solver(#[from] fista::FistaError),
    #[error(transparent)]
    Core(#[from] crate::image::CoreError),
}

/// PCA basis with corrected eigenvalues, noise level, subspace dimension and
/// row weights.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    basis: Array2<f64>,
    raw_eigs: Vec<f64>,
    corrected_eigs: Vec<f64>,
    sigma2_hat: f64,
    dim: usize,
    weights: Vec<f64>,
}

impl SubspaceModel {
    /// Assembles a model from its parts, revalidating the invariants.
    /// `basis` is `bands x bands` with eigenvector columns in
    /// eigenvalue-descending order.
    pub fn from_parts(
        basis: Array2<f64>,
        raw_eigs: Vec<f64>,
        corrected_eigs: Vec<f64>,
        sigma2_hat: f64,
        dim: usize,
        weights: Vec<f64>,
    ) -> Result<SubspaceModel, SssError> {
        let nb = basis.nrows();
        if basis.ncols() != nb || raw_eigs.len() != nb || corrected_eigs.len() != nb {
            return Err(SssError::DimensionMismatch(
                "basis and eigenvalue lists must all have the band dimension".into(),
            ));
        }
        if dim == 0 || dim > nb {
            return Err(SssError::InvalidInput(format!(
                "subspace dimension {dim} out of range for {nb} bands"
            )));
        }
        if weights.len() != dim {
            return Err(SssError::DimensionMismatch(format!(
                "{} weights for dimension {dim}",
                weights.len()
            )));
        }
        if sigma2_hat.is_nan()
            || sigma2_hat < 0.0
            || weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        {
            return Err(SssError::InvalidInput(
                "noise variance and weights must be finite and nonnegative".into(),
            ));
        }
        if corrected_eigs.windows(2).any(|w| w[0] < w[1]) || corrected_eigs.iter().any(|&v| v < 0.0)
        {
            return Err(SssError::InvalidInput(
                "corrected eigenvalues must be non-increasing and nonnegative".into(),
            ));
        }
        if weights.windows(2).any(|w| w[1] < w[0]) {
            return Err(SssError::InvalidInput(
                "weights must be non-decreasing".into(),
            ));
        }
        let bottom = *corrected_eigs.last().unwrap();
        if (sigma2_hat - bottom).abs() > 1e-12 * bottom.abs().max(1.0) {
            return Err(SssError::InvalidInput(
                "sigma2_hat must equal the smallest corrected eigenvalue".into(),
            ));
        }
        let model = SubspaceModel {
            basis,
            raw_eigs,
            corrected_eigs,
            sigma2_hat,
            dim,
            weights,
        };
        debug_assert!(model.basis_orthonormality_defect() < 1e-8);
        Ok(model)
    }

    pub fn bands(&self) -> usize {
        self.basis.nrows()
    }

    /// Full orthonormal basis, eigenvector columns in descending eigenvalue
    /// order.
    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// First `dim` basis columns.
    pub fn signal_basis(&self) -> ndarray::ArrayView2<'_, f64> {
        self.basis.slice(s![.., ..self.dim])
    }

    pub fn raw_eigs(&self) -> &[f64] {
        &self.raw_eigs
    }

    pub fn corrected_eigs(&self) -> &[f64] {
        &self.corrected_eigs
    }

    pub fn sigma2_hat(&self) -> f64 {
        self.sigma2_hat
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Max-norm of `H^T H - I`.
    pub fn basis_orthonormality_defect(&self) -> f64 {
        let gram = self.basis.t().dot(&self.basis);
        let mut defect = 0.0_f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((gram[[i, j]] - expect).abs());
            }
        }
        defect
    }

    /// Eigenvalue/weight table: `index,raw_eig,corrected_eig,weight` with
    /// one row per band; weights beyond the signal dimension print as `inf`.
    pub fn eigen_diagnostics_csv(&self) -> String {
        let mut out = String::from("index,raw_eig,corrected_eig,weight\n");
        for b in 0..self.bands() {
            let weight = if b < self.dim {
                format!("{}", self.weights[b])
            } else {
                "inf".to_string()
            };
            writeln!(
                out,
                "{},{},{},{}",
                b + 1,
                self.raw_eigs[b],
                self.corrected_eigs[b],
                weight
            )
            .expect("string write");
        }
        out
    }
}

/// Merged representation of a descending sequence: one entry per group of
/// numerically equal values, with its multiplicity.
fn merge_equal_blocks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut vals: Vec<f64> = Vec::new();
    let mut mults: Vec<usize> = Vec::new();
    for &v in values {
        match vals.last() {
            Some(&head) if (head - v).abs() <= 1e-12 * head.abs().max(1.0) => {
                let m = *mults.last().unwrap();
                // running mean keeps the block value representative
                let new = (head * m as f64 + v) / (m + 1) as f64;
                *vals.last_mut().unwrap() = new;
                *mults.last_mut().unwrap() = m + 1;
            }
            _ => {
                vals.push(v);
                mults.push(1);
            }
        }
    }
    (vals, mults)
}

/// Stein denominators per merged block:
/// `1 + (1/ns) sum_{l != k} m_l (d2_k + d2_l) / (d2_k - d2_l)`.
fn stein_denominators(values: &[f64], mults: &[usize], ns: usize) -> Vec<f64> {
    let ns = ns as f64;
    let k = values.len();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let mut sum = 0.0;
        for j in 0..k {
            if j != i {
                sum += mults[j] as f64 * (values[i] + values[j]) / (values[i] - values[j]);
            }
        }
        out.push(1.0 + sum / ns);
    }
    out
}

/// Stein bias correction on merged blocks: eigenvalue over denominator.
fn stein_blocks(values: &[f64], mults: &[usize], ns: usize) -> Vec<f64> {
    values
        .iter()
        .zip(stein_denominators(values, mults, ns))
        .map(|(&v, a)| v / a)
        .collect()
}

/// One block of the isotonized correction: multiplicity-weighted eigenvalue
/// and denominator sums, whose ratio is the pooled corrected value.
#[derive(Debug, Clone, Copy)]
struct PairBlock {
    num: f64,
    den: f64,
    mult: usize,
}

impl PairBlock {
    fn ratio(&self) -> f64 {
        self.num / self.den
    }

    fn merge(&mut self, other: PairBlock) {
        self.num += other.num;
        self.den += other.den;
        self.mult += other.mult;
    }
}

/// Isotonizing step of the correction, operating on
/// (eigenvalue, denominator) pairs: adjacent blocks are pooled by summing
/// numerators and denominators whenever a denominator is nonpositive or the
/// pooled ratios violate the non-increasing order. Summed denominators over
/// the whole spectrum telescope to the band count, so pooling always
/// terminates with positive denominators and nonnegative ratios.
fn stein_isotonic_pairs(values: &[f64], mults: &[usize], ns: usize) -> Vec<PairBlock> {
    let denoms = stein_denominators(values, mults, ns);
    let mut stack: Vec<PairBlock> = Vec::with_capacity(values.len());
    for ((&v, &m), a) in values.iter().zip(mults).zip(denoms) {
        stack.push(PairBlock {
            num: v * m as f64,
            den: a * m as f64,
            mult: m,
        });
        loop {
            let n = stack.len();
            if n < 2 {
                break;
            }
            let prev = stack[n - 2];
            let last = stack[n - 1];
            let must_pool = prev.den <= 0.0
                || last.den <= 0.0
                || prev.ratio() < last.ratio();
            if must_pool {
                let last = stack.pop().unwrap();
                stack.last_mut().unwrap().merge(last);
            } else {
                break;
            }
        }
    }
    while stack.len() >= 2 && stack.last().unwrap().den <= 0.0 {
        let last = stack.pop().unwrap();
        stack.last_mut().unwrap().merge(last);
    }
    stack
}

/// Stein-corrected eigenvalues, one per input entry. The input must be
/// sorted non-increasing and nonnegative; numerically equal neighbors are
/// treated as a single eigenvalue with their multiplicity. The output may
/// be non-monotone or negative; [`isotonic_decreasing`] repairs that.
///
/// Panics if the input is not sorted non-increasing.
pub fn stein_correct(raw_eigs: &[f64], ns: usize) -> Vec<f64> {
    assert!(
        raw_eigs.windows(2).all(|w| w[0] >= w[1]),
        "eigenvalues must be sorted non-increasing"
    );
    let (vals, mults) = merge_equal_blocks(raw_eigs);
    let corrected = stein_blocks(&vals, &mults, ns);
    let mut out = Vec::with_capacity(raw_eigs.len());
    for (c, m) in corrected.iter().zip(&mults) {
        out.extend(std::iter::repeat_n(*c, *m));
    }
    out
}

/// Weighted pool-adjacent-violators fit under the non-increasing
/// constraint, followed by clamping negative pooled values to zero.
/// Returns one value per pooled block with its total multiplicity; the
/// flattened sequence is the least-squares non-increasing nonnegative fit.
pub fn isotonic_decreasing(values: &[f64], multiplicities: &[usize]) -> (Vec<f64>, Vec<usize>) {
    assert_eq!(values.len(), multiplicities.len());
    let mut vals: Vec<f64> = Vec::with_capacity(values.len());
    let mut weights: Vec<f64> = Vec::with_capacity(values.len());
    let mut mults: Vec<usize> = Vec::with_capacity(values.len());
    for (&v, &m) in values.iter().zip(multiplicities) {
        vals.push(v);
        weights.push(m as f64);
        mults.push(m);
        while vals.len() >= 2 && vals[vals.len() - 2] < vals[vals.len() - 1] {
            let v2 = vals.pop().unwrap();
            let w2 = weights.pop().unwrap();
            let m2 = mults.pop().unwrap();
            let last = vals.len() - 1;
            let pooled = (vals[last] * weights[last] + v2 * w2) / (weights[last] + w2);
            vals[last] = pooled;
            weights[last] += w2;
            mults[last] += m2;
        }
    }
    for v in vals.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    // clamping can create equal adjacent blocks; merge them
    let mut out_vals: Vec<f64> = Vec::with_capacity(vals.len());
    let mut out_mults: Vec<usize> = Vec::with_capacity(vals.len());
    for (v, m) in vals.into_iter().zip(mults) {
        match out_vals.last() {
            Some(&head) if head == v => *out_mults.last_mut().unwrap() += m,
            _ => {
                out_vals.push(v);
                out_mults.push(m);
            }
        }
    }
    (out_vals, out_mults)
}

/// Identifies the noise cluster among the pooled blocks and merges it into
/// a single bottom block.
///
/// Finite-sample fluctuations detach small sub-blocks from the noise
/// cluster, and in heavy starvation the correction can push bottom blocks
/// to zero; reading the noise level off the literal bottom block would then
/// absorb the whole spectrum into the signal dimension. The cluster anchor
/// is the largest-multiplicity positive block (the bottommost on ties).
/// Everything below it is a sub-noise fluctuation and is merged in;
/// blocks above join while they lie inside the Marchenko-Pastur support
/// window `(1 + sqrt(c))^2 / (1 - sqrt(c))^2`, `c = nb/ns`, of the running
/// cluster mean — the spread a single noise level produces at this sample
/// size. When the sample covariance is rank deficient (no noise floor
/// measurable), the zero block is genuine and is left alone.
fn consolidate_noise_cluster(blocks: &mut Vec<PairBlock>, sample_full_rank: bool, nb: usize, ns: usize) {
    if blocks.len() < 2 || !sample_full_rank {
        return;
    }
    let anchor = blocks
        .iter()
        .enumerate()
        .filter(|(_, b)| b.ratio() > 0.0)
        .max_by(|(ia, a), (ib, b)| a.mult.cmp(&b.mult).then(ia.cmp(ib)))
        .map(|(i, _)| i);
    let Some(mut anchor) = anchor else {
        return;
    };

    // absorb every block below the anchor
    while anchor + 1 < blocks.len() {
        let below = blocks.remove(anchor + 1);
        blocks[anchor].merge(below);
    }

    // absorb blocks above while they fit a single noise level's spread
    let sqrt_c = (nb as f64 / ns as f64).sqrt();
    let lower = (1.0 - sqrt_c) * (1.0 - sqrt_c);
    if lower <= f64::EPSILON {
        return;
    }
    let window = (1.0 + sqrt_c) * (1.0 + sqrt_c) / lower;
    while anchor > 0 {
        let cluster = blocks[anchor].ratio();
        let next = blocks[anchor - 1].ratio();
        if next <= cluster * window {
            let above = blocks.remove(anchor - 1);
            anchor -= 1;
            blocks[anchor].merge(above);
        } else {
            break;
        }
    }
}

/// PCA of the uncentered sample covariance of the measurements, with Stein
/// eigenvalue correction, isotonizing repair, noise-cluster consolidation,
/// noise-level and dimension estimation, and Bayesian row weights.
///
/// The repair step pools adjacent (eigenvalue, denominator) pairs rather
/// than least-squares-averaging the per-index corrected values: pooled
/// ratios of sums are stable where individual ratios swing wildly whenever
/// a denominator approaches zero, which happens routinely once the sample
/// count is within an order of magnitude of the band count.
pub fn estimate_subspace(measurements: &Array2<f64>) -> Result<SubspaceModel, SssError> {
    let (nb, ns) = measurements.dim();
    if nb < 2 || ns < 2 {
        return Err(SssError::InvalidInput(format!(
            "need at least 2 bands and 2 samples, got {nb}x{ns}"
        )));
    }
    if !measurements.iter().all(|v| v.is_finite()) {
        return Err(SssError::InvalidInput("non-finite measurements".into()));
    }
    if measurements.iter().all(|&v| v == 0.0) {
        return Err(SssError::DegenerateCovariance);
    }

    let mut cov = measurements.dot(&measurements.t());
    cov.mapv_inplace(|v| v / ns as f64);
    // enforce exact symmetry before the eigendecomposition
    let cov = (&cov + &cov.t()) * 0.5;
    let (eigs, basis) = linalg::eigh_descending(&cov.view());
    let raw_eigs: Vec<f64> = eigs.into_iter().map(|v| v.max(0.0)).collect();

    let (block_vals, block_mults) = merge_equal_blocks(&raw_eigs);
    let mut blocks = stein_isotonic_pairs(&block_vals, &block_mults, ns);
    let sample_full_rank = *raw_eigs.last().unwrap() > 1e-12 * raw_eigs[0];
    consolidate_noise_cluster(&mut blocks, sample_full_rank, nb, ns);

    let mut corrected_eigs = Vec::with_capacity(nb);
    for block in &blocks {
        corrected_eigs.extend(std::iter::repeat_n(block.ratio().max(0.0), block.mult));
    }

    let sigma2_hat = *corrected_eigs.last().expect("at least one eigenvalue");
    let dim = corrected_eigs.iter().filter(|&&v| v > sigma2_hat).count();
    if dim == 0 {
        return Err(SssError::NoSignalSubspace);
    }
    let weights: Vec<f64> = corrected_eigs[..dim]
        .iter()
        .map(|&d2| sigma2_hat / (d2 - sigma2_hat))
        .collect();

    SubspaceModel::from_parts(basis, raw_eigs, corrected_eigs, sigma2_hat, dim, weights)
}

/// Balance between the spatial smoothing and the weighted row penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SssParams {
    pub lambda: f64,
}

impl Default for SssParams {
    fn default() -> SssParams {
        SssParams { lambda: 1.0 }
    }
}

impl SssParams {
    pub fn new(lambda: f64) -> Result<SssParams, SssError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(SssError::InvalidInput(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(SssParams { lambda })
    }
}

/// Euclidean projection of `point` onto the closed ball around `center`.
pub fn ball_project(point: ArrayView1<f64>, center: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    let diff = &point - &center;
    let dist = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dist <= radius {
        point.to_owned()
    } else {
        let scale = radius / dist;
        let mut out = center.to_owned();
        out.zip_mut_with(&diff, |c, &d| *c += d * scale);
        out
    }
}

/// Smooth-plus-constraint splitting on the `R x np` coefficient matrix.
pub struct SssProblem<'a> {
    centers: Array2<f64>,
    mask: &'a SamplingMask,
    op: GradientOperator,
    weights: &'a [f64],
    lambda: f64,
    radius: f64,
    dim: usize,
}

impl<'a> SssProblem<'a> {
    /// `centers` is the `R x ns` matrix of ball centers `H_{1:R}^T Y_I`.
    pub fn new(
        centers: Array2<f64>,
        mask: &'a SamplingMask,
        height: usize,
        width: usize,
        weights: &'a [f64],
        lambda: f64,
        sigma2_hat: f64,
    ) -> SssProblem<'a> {
        let dim = centers.nrows();
        SssProblem {
            centers,
            mask,
            op: GradientOperator::new(height, width),
            weights,
            lambda,
            radius: (dim as f64 * sigma2_hat).sqrt(),
            dim,
        }
    }

    /// `(1/2R) ||S D||^2 + (lambda/2) sum_b w_b ||S_b||^2`.
    pub fn smooth_objective(&self, s: &Array2<f64>) -> f64 {
        let g = self.op.apply_gradient(&s.view()).expect("checked shape");
        let energy: f64 = g.iter().map(|v| v * v).sum();
        let mut weighted = 0.0;
        for (row, &w) in s.axis_iter(Axis(0)).zip(self.weights) {
            weighted += w * row.iter().map(|v| v * v).sum::<f64>();
        }
        energy / (2.0 * self.dim as f64) + 0.5 * self.lambda * weighted
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn centers(&self) -> &Array2<f64> {
        &self.centers
    }
}

impl FistaProblem for SssProblem<'_> {
    fn gradient(&self, s: &Array2<f64>) -> Array2<f64> {
        let mut g = self.op.apply_laplacian(&s.view()).expect("checked shape");
        let inv_dim = -1.0 / self.dim as f64;
        g.mapv_inplace(|v| v * inv_dim);
        for (b, &w) in self.weights.iter().enumerate() {
            if w != 0.0 {
                let coeff = self.lambda * w;
                let src = s.row(b);
                let mut dst = g.row_mut(b);
                dst.zip_mut_with(&src, |d, &x| *d += coeff * x);
            }
        }
        g
    }

    fn prox(&self, mut point: Array2<f64>, _step: f64) -> Array2<f64> {
        for (n, &p) in self.mask.indices().iter().enumerate() {
            let projected = ball_project(point.column(p), self.centers.column(n), self.radius);
            point.column_mut(p).assign(&projected);
        }
        point
    }

    fn lipschitz_bound(&self) -> f64 {
        let max_w = self.weights.iter().cloned().fold(0.0_f64, f64::max);
        8.0 + self.lambda * max_w
    }

    fn objective(&self, s: &Array2<f64>) -> Option<f64> {
        Some(self.smooth_objective(s))
    }
}

/// Reconstructs a full image constrained to the estimated signal subspace.
/// `shape` is `(bands, height, width)`; the result is `H_{1:R} S` with every
/// measured pixel's coefficient column inside its data-fit ball.
pub fn sss_reconstruct(
    measurements: &Array2<f64>,
    mask: &SamplingMask,
    shape: (usize, usize, usize),
    model: &SubspaceModel,
    params: &SssParams,
    config: &FistaConfig,
) -> Result<(SpectrumImage, SolveReport), SssError> {
    let (bands, height, width) = shape;
    if measurements.nrows() != bands || model.bands() != bands {
        return Err(SssError::DimensionMismatch(format!(
            "bands disagree: measurements {}, model {}, shape {}",
            measurements.nrows(),
            model.bands(),
            bands
        )));
    }
    if mask.np() != height * width {
        return Err(SssError::DimensionMismatch(format!(
            "mask covers {} pixels, grid is {}x{}",
            mask.np(),
            height,
            width
        )));
    }
    if measurements.ncols() != mask.ns() {
        return Err(SssError::DimensionMismatch(format!(
            "{} measurement columns for {} mask indices",
            measurements.ncols(),
            mask.ns()
        )));
    }
    if model.dim() == 0 {
        return Err(SssError::NoSignalSubspace);
    }
    if model.weights().iter().any(|w| !w.is_finite()) {
        return Err(SssError::InvalidInput("non-finite weights".into()));
    }
    SssParams::new(params.lambda)?;

    let h_r = model.signal_basis();
    let centers = h_r.t().dot(measurements);

    // init: measured columns at their ball centers, the rest at the mean center
    let mean_center = centers.mean_axis(Axis(1)).expect("ns >= 1");
    let mut s0 = Array2::zeros((model.dim(), mask.np()));
    for mut col in s0.columns_mut() {
        col.assign(&mean_center);
    }
    for (n, &p) in mask.indices().iter().enumerate() {
        s0.column_mut(p).assign(&centers.column(n));
    }

    let problem = SssProblem::new(
        centers,
        mask,
        height,
        width,
        model.weights(),
        params.lambda,
        model.sigma2_hat(),
    );
    let (s_hat, report) = fista::solve(&problem, s0, config)?;
    let x_hat = model.signal_basis().dot(&s_hat);
    Ok((SpectrumImage::new(height, width, x_hat)?, report))
}

/// Largest violation of the per-pixel data-fit constraint
/// `(1/R) ||H^T y_n - s_n||^2 <= sigma2` over the measured pixels, for a
/// reconstruction expressed back in image space.
pub fn constraint_violation(
    reconstruction: &SpectrumImage,
    measurements: &Array2<f64>,
    mask: &SamplingMask,
    model: &SubspaceModel,
) -> f64 {
    let h_r = model.signal_basis();
    let coeffs = h_r.t().dot(reconstruction.data());
    let centers = h_r.t().dot(measurements);
    let r = model.dim() as f64;
    let mut worst: f64 = f64::NEG_INFINITY;
    for (n, &p) in mask.indices().iter().enumerate() {
        let d2: f64 = coeffs
            .column(p)
            .iter()
            .zip(centers.column(n).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        worst = worst.max(d2 / r - model.sigma2_hat());
    }
    worst
}
