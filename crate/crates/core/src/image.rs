//! Spectrum-image and sampling-mask data model.
//!
//! A [`SpectrumImage`] stores a `bands x pixels` matrix where column `p`
//! holds the spectrum of the pixel at `(y, x) = (p / width, p % width)`
//! (row-major spatial indexing). A [`SamplingMask`] is the ordered set of
//! pixel indices that were actually acquired.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid image dimensions: bands={bands}, height={height}, width={width}")]
    InvalidDims {
        bands: usize,
        height: usize,
        width: usize,
    },
}

/// A multiband image stored as a `bands x pixels` matrix.
///
/// Column `p` is the spectrum of pixel `(p / width, p % width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    bands: usize,
    height: usize,
    width: usize,
    data: Array2<f64>,
}

impl SpectrumImage {
    /// Wraps a `bands x (height*width)` matrix. Fails on shape mismatch or
    /// zero-sized axes.
    pub fn new(
        height: usize,
        width: usize,
        data: Array2<f64>,
    ) -> Result<SpectrumImage, CoreError> {
        let bands = data.nrows();
        if bands == 0 || height == 0 || width == 0 {
            return Err(CoreError::InvalidDims {
                bands,
                height,
                width,
            });
        }
        if data.ncols() != height * width {
            return Err(CoreError::DimensionMismatch(format!(
                "data has {} columns, expected {}x{}={}",
                data.ncols(),
                height,
                width,
                height * width
            )));
        }
        Ok(SpectrumImage {
            bands,
            height,
            width,
            data,
        })
    }

    /// All-zero image.
    pub fn zeros(bands: usize, height: usize, width: usize) -> SpectrumImage {
        SpectrumImage {
            bands,
            height,
            width,
            data: Array2::zeros((bands, height * width)),
        }
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of pixels `height * width`.
    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<f64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Column index of spatial position `(y, x)`.
    pub fn pixel_index(&self, y: usize, x: usize) -> usize {
        y * self.width + x
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Ordered index set of the acquired pixel positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    indices: Vec<usize>,
    np: usize,
}

impl SamplingMask {
    /// Validates that `indices` is strictly increasing, within `[0, np)` and
    /// non-empty.
    pub fn new(np: usize, indices: Vec<usize>) -> Result<SamplingMask, CoreError> {
        if np == 0 {
            return Err(CoreError::InvalidMask("np must be positive".into()));
        }
        if indices.is_empty() {
            return Err(CoreError::InvalidMask("mask has no indices".into()));
        }
        for pair in indices.windows(2) {
            if pair[1] <= pair[0] {
                return Err(CoreError::InvalidMask(format!(
                    "indices not strictly increasing at {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        let last = *indices.last().unwrap();
        if last >= np {
            return Err(CoreError::InvalidMask(format!(
                "index {last} out of range for np={np}"
            )));
        }
        Ok(SamplingMask { indices, np })
    }

    /// Mask selecting every pixel.
    pub fn full(np: usize) -> SamplingMask {
        SamplingMask {
            indices: (0..np).collect(),
            np,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn np(&self) -> usize {
        self.np
    }

    /// Number of acquired pixels.
    pub fn ns(&self) -> usize {
        self.indices.len()
    }

    /// Sampling ratio `ns / np` in `(0, 1]`.
    pub fn ratio(&self) -> f64 {
        self.ns() as f64 / self.np as f64
    }
}

/// Draws `ns` distinct pixel indices uniformly without replacement,
/// deterministically for a given seed, and returns them sorted.
pub fn make_random_mask(np: usize, ns: usize, seed: u64) -> Result<SamplingMask, CoreError> {
    if ns == 0 || ns > np {
        return Err(CoreError::InvalidMask(format!(
            "ns={ns} out of range for np={np}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..np).collect();
    let (chosen, _) = all.partial_shuffle(&mut rng, ns);
    let mut indices = chosen.to_vec();
    indices.sort_unstable();
    SamplingMask::new(np, indices)
}

/// Gathers the mask's columns of `image` into a `bands x ns` matrix, in mask
/// order.
pub fn restrict(image: &SpectrumImage, mask: &SamplingMask) -> Result<Array2<f64>, CoreError> {
    if mask.np() != image.num_pixels() {
        return Err(CoreError::DimensionMismatch(format!(
            "mask covers {} pixels, image has {}",
            mask.np(),
            image.num_pixels()
        )));
    }
    Ok(restrict_columns(&image.data().view(), mask))
}

/// Column-gather on a raw `k x np` matrix.
pub fn restrict_columns(rows: &ArrayView2<f64>, mask: &SamplingMask) -> Array2<f64> {
    let k = rows.nrows();
    let mut out = Array2::zeros((k, mask.ns()));
    for (j, &p) in mask.indices().iter().enumerate() {
        out.column_mut(j).assign(&rows.column(p));
    }
    out
}

/// Places the `k x ns` columns back at their mask positions in a zero
/// `k x np` matrix.
pub fn scatter(columns: &ArrayView2<f64>, mask: &SamplingMask) -> Array2<f64> {
    let k = columns.nrows();
    assert_eq!(
        columns.ncols(),
        mask.ns(),
        "scatter: column count must equal mask size"
    );
    let mut out = Array2::zeros((k, mask.np()));
    for (j, &p) in mask.indices().iter().enumerate() {
        out.column_mut(p).assign(&columns.column(j));
    }
    out
}

/// Fills a full `k x np` matrix with the measured columns at their mask
/// positions and the mean measured spectrum everywhere else.
pub fn mean_fill(measurements: &ArrayView2<f64>, mask: &SamplingMask) -> Array2<f64> {
    let k = measurements.nrows();
    assert_eq!(measurements.ncols(), mask.ns());
    let mean = measurements.mean_axis(Axis(1)).unwrap();
    let mut out = Array2::zeros((k, mask.np()));
    for mut col in out.columns_mut() {
        col.assign(&mean);
    }
    for (j, &p) in mask.indices().iter().enumerate() {
        out.column_mut(p).assign(&measurements.column(j));
    }
    out
}
