//! Reconstruction of partially sampled multiband spectrum-images.
//!
//! A spectrum-image is a data cube with one full spectrum (`bands` channels)
//! per spatial pixel, stored as a `bands x pixels` matrix. When only a subset
//! of the pixels has been acquired, the full image can be recovered by
//! variational reconstruction. Two solvers are provided:
//!
//! * [`snn::snn_reconstruct`] — quadratic data fit plus gradient-energy
//!   spatial smoothing, with a nuclear-norm penalty on the spectral structure
//!   (solved by FISTA with singular-value soft-thresholding), and an
//!   automatic hyperparameter search ([`snn::snn_tune`]).
//! * [`sss::sss_reconstruct`] — reconstruction constrained to a PCA signal
//!   subspace estimated from the measured pixels, with per-pixel data-fit
//!   balls and Bayesian row weights derived from corrected eigenvalues
//!   ([`sss::estimate_subspace`]).
//!
//! Supporting modules cover synthetic ground-truth generation
//! ([`phantom`]), evaluation metrics ([`metrics`]), the generic FISTA
//! driver ([`fista`]), and file formats ([`io`]).

pub mod fista;
pub mod gradient;
pub mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod snn;
pub mod sss;

mod linalg;

pub use fista::{FistaConfig, SolveReport, StopReason};
pub use gradient::GradientOperator;
pub use image::{make_random_mask, mean_fill, restrict, scatter, SamplingMask, SpectrumImage};
