//! Evaluation metrics: normalized mean square error, average spectral angle
//! distance between endmember sets, and known-endmember abundance inversion.

use crate::image::SpectrumImage;
use crate::linalg;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("reference has zero norm")]
    ZeroNormTruth,
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("endmember matrix is rank deficient")]
    RankDeficient,
}

/// `||estimate - truth||_F^2 / ||truth||_F^2`.
pub fn nmse(truth: &ArrayView2<f64>, estimate: &ArrayView2<f64>) -> Result<f64, MetricsError> {
    if truth.dim() != estimate.dim() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            truth.dim(),
            estimate.dim()
        )));
    }
    let denom: f64 = truth.iter().map(|v| v * v).sum();
    if denom <= 0.0 {
        return Err(MetricsError::ZeroNormTruth);
    }
    let num: f64 = truth
        .iter()
        .zip(estimate.iter())
        .map(|(t, e)| (e - t) * (e - t))
        .sum();
    Ok(num / denom)
}

/// Angle in radians between two spectra, in `[0, pi]`.
pub fn spectral_angle(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<f64, MetricsError> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 {
        return Err(MetricsError::ZeroColumn(0));
    }
    if nb == 0.0 {
        return Err(MetricsError::ZeroColumn(1));
    }
    let cos = (a.dot(&b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos())
}

/// Average spectral angle distance between two endmember sets, with the
/// matched per-pair angles. Columns are matched greedily by smallest
/// pairwise angle, so a column permutation of either argument does not
/// change the result.
pub fn asad_matched(
    m_true: &ArrayView2<f64>,
    m_est: &ArrayView2<f64>,
) -> Result<(f64, Vec<f64>), MetricsError> {
    if m_true.nrows() != m_est.nrows() || m_true.ncols() != m_est.ncols() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            m_true.dim(),
            m_est.dim()
        )));
    }
    let nc = m_true.ncols();
    let mut angles = Array2::zeros((nc, nc));
    for i in 0..nc {
        for j in 0..nc {
            angles[[i, j]] = spectral_angle(m_true.column(i), m_est.column(j))?;
        }
    }
    let mut per_true = vec![f64::NAN; nc];
    let mut used_true = vec![false; nc];
    let mut used_est = vec![false; nc];
    for _ in 0..nc {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..nc {
            if used_true[i] {
                continue;
            }
            for j in 0..nc {
                if used_est[j] {
                    continue;
                }
                if angles[[i, j]] < best.2 {
                    best = (i, j, angles[[i, j]]);
                }
            }
        }
        used_true[best.0] = true;
        used_est[best.1] = true;
        per_true[best.0] = best.2;
    }
    let mean = per_true.iter().sum::<f64>() / nc as f64;
    Ok((mean, per_true))
}

/// Mean matched spectral angle; see [`asad_matched`].
pub fn asad(m_true: &ArrayView2<f64>, m_est: &ArrayView2<f64>) -> Result<f64, MetricsError> {
    asad_matched(m_true, m_est).map(|(mean, _)| mean)
}

const NNLS_MAX_ITERS: usize = 500;
const NNLS_TOL: f64 = 1e-10;

/// Per-pixel nonnegative least squares `min_{a >= 0} ||x_p - M a||^2` by
/// projected gradient with step `1/||M^T M||`, run for up to 500 iterations
/// or until the relative change drops below 1e-10. With `renormalize`, each
/// abundance column is rescaled to sum to one afterwards.
pub fn invert_abundances(
    image: &SpectrumImage,
    endmembers: &Array2<f64>,
    renormalize: bool,
) -> Result<Array2<f64>, MetricsError> {
    invert_abundance_matrix(&image.data().view(), &endmembers.view(), renormalize)
}

/// Matrix form of [`invert_abundances`] for `bands x pixels` data.
pub fn invert_abundance_matrix(
    data: &ArrayView2<f64>,
    endmembers: &ArrayView2<f64>,
    renormalize: bool,
) -> Result<Array2<f64>, MetricsError> {
    let (nb, nc) = endmembers.dim();
    if nc > nb {
        return Err(MetricsError::ShapeMismatch(format!(
            "{nc} endmembers in {nb} bands"
        )));
    }
    if data.nrows() != nb {
        return Err(MetricsError::ShapeMismatch(format!(
            "data has {} bands, endmembers {nb}",
            data.nrows()
        )));
    }
    let mtm = endmembers.t().dot(endmembers);
    let (eigs, _) = linalg::eigh_descending(&mtm.view());
    let top = eigs[0];
    let bottom = *eigs.last().unwrap();
    if top.is_nan() || top <= 0.0 || bottom <= 1e-12 * top {
        return Err(MetricsError::RankDeficient);
    }
    let step = 1.0 / top;
    let mtx = endmembers.t().dot(data);
    let np = data.ncols();
    let mut out = Array2::zeros((nc, np));

    // fixed-size chunks so results do not depend on the worker count
    let chunk = 1024;
    let ranges: Vec<(usize, usize)> = (0..np)
        .step_by(chunk)
        .map(|s| (s, (s + chunk).min(np)))
        .collect();
    let columns: Vec<(usize, Vec<Array1<f64>>)> = ranges
        .into_par_iter()
        .map(|(start, end)| {
            let solved: Vec<Array1<f64>> = (start..end)
                .map(|p| {
                    nnls_projected_gradient(&mtm, &mtx.column(p).to_owned(), step, NNLS_MAX_ITERS)
                })
                .collect();
            (start, solved)
        })
        .collect();
    for (start, cols) in columns {
        for (offset, col) in cols.into_iter().enumerate() {
            out.column_mut(start + offset).assign(&col);
        }
    }

    if renormalize {
        for mut col in out.columns_mut() {
            let s: f64 = col.iter().sum();
            if s > 0.0 {
                col.mapv_inplace(|v| v / s);
            }
        }
    }
    Ok(out)
}

/// Projected-gradient iteration for one pixel; `mtx_col` is `M^T x`.
pub(crate) fn nnls_projected_gradient(
    mtm: &Array2<f64>,
    mtx_col: &Array1<f64>,
    step: f64,
    max_iters: usize,
) -> Array1<f64> {
    let nc = mtm.nrows();
    let mut a = Array1::zeros(nc);
    for _ in 0..max_iters {
        let grad = mtm.dot(&a) - mtx_col;
        let mut next = a.clone();
        next.zip_mut_with(&grad, |v, &g| *v = (*v - step * g).max(0.0));
        let delta: f64 = (&next - &a).iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        a = next;
        if delta <= NNLS_TOL * scale.max(1.0) {
            break;
        }
    }
    a
}

/// Least-squares refit of the endmember matrix from known abundances:
/// `argmin_M ||X - M A||_F^2 = X A^T (A A^T)^{-1}`.
pub fn refit_endmembers(
    data: &ArrayView2<f64>,
    abundances: &ArrayView2<f64>,
) -> Result<Array2<f64>, MetricsError> {
    if data.ncols() != abundances.ncols() {
        return Err(MetricsError::ShapeMismatch(format!(
            "data has {} pixels, abundances {}",
            data.ncols(),
            abundances.ncols()
        )));
    }
    let aat = abundances.dot(&abundances.t());
    let xat = data.dot(&abundances.t());
    // solve (A A^T) M^T = (X A^T)^T
    let mt = linalg::solve_spd(&aat.view(), &xat.t().to_owned().view())
        .ok_or(MetricsError::RankDeficient)?;
    Ok(mt.t().to_owned())
}

/// Bundle of the evaluation results, serialized as JSON by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub nmse_image: f64,
    pub asad: Option<f64>,
    pub nmse_abundance: Option<f64>,
    pub per_component_sad: Vec<f64>,
}
