//! Synthetic ground truth for controlled experiments.
//!
//! The noise-free image follows the linear mixing model `X = M A`: columns
//! of `M` are elementary spectra ("endmembers") and `A` holds per-pixel
//! nonnegative, sum-to-one mixture coefficients ("abundances"). Gaussian
//! noise is added at a requested SNR against the mean signal power.
//!
//! The endmember generator imitates energy-loss spectra — a decaying
//! power-law background with component-specific absorption edges and peaks —
//! so the low-rank and spatial-smoothness assumptions hold the same way
//! they do on real data.

use crate::image::SpectrumImage;
use crate::metrics;
use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhantomError {
    #[error("invalid dimensions: {0}")]
    InvalidDims(String),
    #[error("could not satisfy endmember separation after {0} attempts")]
    SeparationFailed(usize),
}

/// Ground truth with its generating factors.
#[derive(Debug, Clone)]
pub struct Phantom {
    endmembers: Array2<f64>,
    abundances: Array2<f64>,
    truth: SpectrumImage,
    snr_db: f64,
    noise_seed: u64,
}

impl Phantom {
    /// Builds endmembers, abundance maps and the noise-free image from one
    /// master seed. `snr_db` and the derived noise seed are stored for
    /// [`Phantom::noisy`]; pass `f64::INFINITY` for a noise-free phantom.
    pub fn generate(
        bands: usize,
        height: usize,
        width: usize,
        components: usize,
        snr_db: f64,
        seed: u64,
    ) -> Result<Phantom, PhantomError> {
        let endmembers = make_endmembers(bands, components, seed)?;
        let abundances = make_abundance_maps(height, width, components, seed.wrapping_add(1))?;
        let truth_data = endmembers.dot(&abundances);
        let truth = SpectrumImage::new(height, width, truth_data)
            .map_err(|e| PhantomError::InvalidDims(e.to_string()))?;
        Ok(Phantom {
            endmembers,
            abundances,
            truth,
            snr_db,
            noise_seed: seed.wrapping_add(2),
        })
    }

    pub fn endmembers(&self) -> &Array2<f64> {
        &self.endmembers
    }

    pub fn abundances(&self) -> &Array2<f64> {
        &self.abundances
    }

    pub fn truth(&self) -> &SpectrumImage {
        &self.truth
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// Noisy observation at the stored SNR, plus the noise variance used.
    pub fn noisy(&self) -> (SpectrumImage, f64) {
        add_noise(&self.truth, self.snr_db, self.noise_seed)
    }
}

/// `components` smooth nonnegative maps on an `height x width` grid:
/// randomly placed Gaussian blobs per foreground component (component `k`
/// carries `k` blobs, so the components live at distinct structure scales)
/// over a constant background, normalized per pixel to sum to one.
pub fn make_abundance_maps(
    height: usize,
    width: usize,
    components: usize,
    seed: u64,
) -> Result<Array2<f64>, PhantomError> {
    let np = height * width;
    if components < 2 {
        return Err(PhantomError::InvalidDims(
            "need at least 2 components (background plus one blob)".into(),
        ));
    }
    if components > np {
        return Err(PhantomError::InvalidDims(format!(
            "{components} components exceed {np} pixels"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut maps = Array2::zeros((components, np));
    maps.row_mut(0).fill(1.0);
    let short_side = height.min(width) as f64;
    for k in 1..components {
        for _ in 0..k {
            let cy = rng.random_range(0.0..height as f64);
            let cx = rng.random_range(0.0..width as f64);
            let sigma = rng.random_range(short_side / 10.0..short_side / 5.0);
            let amplitude = rng.random_range(2.5..4.0);
            for y in 0..height {
                for x in 0..width {
                    let dy = y as f64 - cy;
                    let dx = x as f64 - cx;
                    let value = amplitude * (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
                    maps[[k, y * width + x]] += value;
                }
            }
        }
    }
    for mut col in maps.columns_mut() {
        let total: f64 = col.iter().sum();
        col.mapv_inplace(|v| v / total);
    }
    Ok(maps)
}

fn sad(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    metrics::spectral_angle(a, b).expect("generated spectra are nonzero")
}

/// `components` distinct nonnegative spectra over `bands` channels: a
/// decaying power-law baseline plus a component-specific absorption edge
/// and a Gaussian peak at distinct positions. Pairwise spectral angles of
/// at least 0.05 rad are enforced by rejection.
pub fn make_endmembers(
    bands: usize,
    components: usize,
    seed: u64,
) -> Result<Array2<f64>, PhantomError> {
    if bands <= components {
        return Err(PhantomError::InvalidDims(format!(
            "need more bands than components, got {bands} <= {components}"
        )));
    }
    const MAX_ATTEMPTS: usize = 100;
    const MIN_SEPARATION: f64 = 0.05;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64 * 0x9E37));
        let mut m = Array2::zeros((bands, components));
        for k in 0..components {
            let gamma = rng.random_range(0.8..2.0);
            let baseline_scale = rng.random_range(0.6..1.2);
            // one absorption edge per component, in its own window
            let slot = 0.15 + 0.7 * (k as f64 + rng.random_range(0.15..0.85)) / components as f64;
            let edge_height = rng.random_range(0.3..0.8);
            let edge_decay = rng.random_range(0.08..0.25);
            let peak_pos = slot + rng.random_range(0.005..0.03);
            let peak_width = rng.random_range(0.006..0.015);
            let peak_height = rng.random_range(0.2..0.5);
            for b in 0..bands {
                let t = b as f64 / (bands - 1) as f64;
                let baseline = baseline_scale * ((t + 0.08) / 0.08).powf(-gamma);
                let edge = if t >= slot {
                    edge_height * (-(t - slot) / edge_decay).exp()
                } else {
                    // sharp but continuous onset
                    edge_height * (-(slot - t) / 0.004).exp()
                };
                let dp = (t - peak_pos) / peak_width;
                let peak = peak_height * (-0.5 * dp * dp).exp();
                m[[b, k]] = baseline + edge + peak;
            }
        }
        let mut separated = true;
        'pairs: for i in 0..components {
            for j in (i + 1)..components {
                if sad(m.column(i), m.column(j)) < MIN_SEPARATION {
                    separated = false;
                    break 'pairs;
                }
            }
        }
        if separated {
            return Ok(m);
        }
    }
    Err(PhantomError::SeparationFailed(MAX_ATTEMPTS))
}

/// Adds i.i.d. Gaussian noise with variance `mean(x^2) / 10^(snr_db/10)`.
/// Returns the noisy image and the variance used. `snr_db = inf` is the
/// no-noise sentinel.
pub fn add_noise(truth: &SpectrumImage, snr_db: f64, seed: u64) -> (SpectrumImage, f64) {
    assert!(!snr_db.is_nan(), "snr_db must not be NaN");
    if snr_db == f64::INFINITY {
        return (truth.clone(), 0.0);
    }
    let data = truth.data();
    let power = data.iter().map(|v| v * v).sum::<f64>() / data.len() as f64;
    let sigma2 = power / 10f64.powf(snr_db / 10.0);
    let sigma = sigma2.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = data.clone();
    noisy.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
    (
        SpectrumImage::new(truth.height(), truth.width(), noisy).expect("shape preserved"),
        sigma2,
    )
}
