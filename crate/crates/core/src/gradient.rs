//! Discrete spatial operators on the pixel grid.
//!
//! `D` is the forward-difference gradient applied to each row (band)
//! independently, with replicate (Neumann) boundaries: the difference across
//! the image border is zero. The induced Laplacian `L = -D D^T` is the
//! 5-point stencil whose spectral norm is at most 8 on a 2-D grid. Both are
//! applied matrix-free; the dense forms only exist in the test oracles.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GradientError {
    #[error("matrix has {got} columns, operator expects {expected}")]
    ShapeMismatch { got: usize, expected: usize },
}

/// Forward-difference gradient / Laplacian on an `height x width` grid with
/// replicate boundary handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientOperator {
    height: usize,
    width: usize,
}

impl GradientOperator {
    pub fn new(height: usize, width: usize) -> GradientOperator {
        assert!(height >= 1 && width >= 1, "grid axes must be positive");
        GradientOperator { height, width }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    fn check(&self, ncols: usize) -> Result<(), GradientError> {
        if ncols != self.num_pixels() {
            return Err(GradientError::ShapeMismatch {
                got: ncols,
                expected: self.num_pixels(),
            });
        }
        Ok(())
    }

    /// Applies `D` to each row: returns `k x 2*np` with horizontal
    /// differences in the first `np` columns and vertical differences in the
    /// rest. The squared Frobenius norm of the result is the
    /// gradient-energy of the input.
    pub fn apply_gradient(&self, rows: &ArrayView2<f64>) -> Result<Array2<f64>, GradientError> {
        self.check(rows.ncols())?;
        let (h, w) = (self.height, self.width);
        let np = h * w;
        let mut out = Array2::zeros((rows.nrows(), 2 * np));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(rows.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut orow, irow)| {
                let u = irow.as_slice().expect("input row not contiguous");
                let o = orow.as_slice_mut().expect("output row not contiguous");
                for y in 0..h {
                    for x in 0..w {
                        let p = y * w + x;
                        if x + 1 < w {
                            o[p] = u[p + 1] - u[p];
                        }
                        if y + 1 < h {
                            o[np + p] = u[p + w] - u[p];
                        }
                    }
                }
            });
        Ok(out)
    }

    /// Applies `D^T` to each row of a `k x 2*np` matrix, the adjoint of
    /// [`GradientOperator::apply_gradient`].
    pub fn apply_gradient_adjoint(
        &self,
        grads: &ArrayView2<f64>,
    ) -> Result<Array2<f64>, GradientError> {
        let (h, w) = (self.height, self.width);
        let np = h * w;
        if grads.ncols() != 2 * np {
            return Err(GradientError::ShapeMismatch {
                got: grads.ncols(),
                expected: 2 * np,
            });
        }
        let mut out = Array2::zeros((grads.nrows(), np));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(grads.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut orow, grow)| {
                let g = grow.as_slice().expect("input row not contiguous");
                let o = orow.as_slice_mut().expect("output row not contiguous");
                let (gh, gv) = g.split_at(np);
                for y in 0..h {
                    for x in 0..w {
                        let p = y * w + x;
                        let mut acc = 0.0;
                        if x > 0 {
                            acc += gh[p - 1];
                        }
                        if x + 1 < w {
                            acc -= gh[p];
                        }
                        if y > 0 {
                            acc += gv[p - w];
                        }
                        if y + 1 < h {
                            acc -= gv[p];
                        }
                        o[p] = acc;
                    }
                }
            });
        Ok(out)
    }

    /// Applies the Laplacian `-D D^T` to each row: the 5-point
    /// neighbor-sum-minus-degree stencil with replicate boundaries.
    pub fn apply_laplacian(&self, rows: &ArrayView2<f64>) -> Result<Array2<f64>, GradientError> {
        self.check(rows.ncols())?;
        let (h, w) = (self.height, self.width);
        let mut out = Array2::zeros(rows.raw_dim());
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(rows.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(mut orow, irow)| {
                let u = irow.as_slice().expect("input row not contiguous");
                let o = orow.as_slice_mut().expect("output row not contiguous");
                for y in 0..h {
                    for x in 0..w {
                        let p = y * w + x;
                        let mut acc = 0.0;
                        let mut degree = 0.0;
                        if x > 0 {
                            acc += u[p - 1];
                            degree += 1.0;
                        }
                        if x + 1 < w {
                            acc += u[p + 1];
                            degree += 1.0;
                        }
                        if y > 0 {
                            acc += u[p - w];
                            degree += 1.0;
                        }
                        if y + 1 < h {
                            acc += u[p + w];
                            degree += 1.0;
                        }
                        o[p] = acc - degree * u[p];
                    }
                }
            });
        Ok(out)
    }
}
