//! Command-line front end for spectrum-image reconstruction.
//!
//! Subcommands cover the whole pipeline: phantom simulation, sampling-mask
//! generation, reconstruction by either method, hyperparameter tuning,
//! evaluation metrics, and subspace diagnostics. Every run writes a JSON
//! manifest next to its outputs with enough information to reproduce it
//! bit-for-bit. Exit codes: 0 success, 2 usage error, 3 data error,
//! 4 numerical failure.

mod commands;
mod error;
mod manifest;

use clap::{Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "spectrec", version, about = "Partial-sampling spectrum-image reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom: truth, noisy observation, factors.
    Simulate {
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        bands: usize,
        #[arg(long)]
        components: usize,
        /// Target SNR in dB; "inf" for a noise-free phantom.
        #[arg(long = "snr-db", default_value = "25.0")]
        snr_db: f64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
    /// Draw a random sampling mask.
    Mask {
        /// Total pixel count; alternative to --from-image.
        #[arg(long)]
        np: Option<usize>,
        /// Take the pixel count from an image header.
        #[arg(long = "from-image")]
        from_image: Option<PathBuf>,
        /// Sampling ratio in (0, 1]; ns = round(ratio * np).
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value = "0")]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a full image from the masked pixels of a noisy image.
    Reconstruct {
        /// "snn" (nuclear-norm penalized) or "sss" (subspace constrained).
        #[arg(long)]
        method: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Spatial weight (snn) or regularization balance (sss, default 1).
        #[arg(long)]
        lambda: Option<f64>,
        /// Spectral weight (snn only). Omit both weights to auto-tune.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long = "max-iters", default_value = "2000")]
        max_iters: usize,
        #[arg(long, default_value = "1e-6")]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
        /// Solve report path; defaults to `<out>.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Tune the snn regularization weights against the estimated noise level.
    Tune {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long = "max-iters", default_value = "2000")]
        max_iters: usize,
        #[arg(long, default_value = "1e-6")]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a reconstruction against ground truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// True endmember spectra (.sib, one column per endmember).
        #[arg(long)]
        endmembers: Option<PathBuf>,
        /// True abundance maps (.sib, one band per component).
        #[arg(long)]
        abundances: Option<PathBuf>,
        /// Also write the report here (it always goes to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Subspace diagnostics: eigenvalue/weight table as CSV.
    PcaDiag {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long = "out-csv")]
        out_csv: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(raw) = std::env::var("SPECTREC_THREADS") {
        let n: usize = raw.parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::Usage(format!(
                "SPECTREC_THREADS must be a positive integer, got {raw:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    configure_threads()?;
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate {
            height,
            width,
            bands,
            components,
            snr_db,
            seed,
            out_dir,
        } => commands::simulate(height, width, bands, components, snr_db, seed, &out_dir),
        Command::Mask {
            np,
            from_image,
            ratio,
            seed,
            out,
        } => commands::mask(np, from_image.as_deref(), ratio, seed, &out),
        Command::Reconstruct {
            method,
            image,
            mask,
            lambda,
            mu,
            max_iters,
            tol,
            out,
            report,
        } => commands::reconstruct(
            &method,
            &image,
            &mask,
            lambda,
            mu,
            max_iters,
            tol,
            &out,
            report.as_deref(),
        ),
        Command::Tune {
            image,
            mask,
            max_iters,
            tol,
            out,
        } => commands::tune(&image, &mask, max_iters, tol, &out),
        Command::Eval {
            truth,
            estimate,
            endmembers,
            abundances,
            out,
        } => commands::eval(
            &truth,
            &estimate,
            endmembers.as_deref(),
            abundances.as_deref(),
            out.as_deref(),
        ),
        Command::PcaDiag {
            image,
            mask,
            out_csv,
        } => commands::pca_diag(&image, &mask, &out_csv),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
