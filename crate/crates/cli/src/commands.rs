//! Subcommand implementations.

use crate::error::CliError;
use crate::manifest::{sibling_manifest_path, ManifestBuilder};
use serde::Serialize;
use serde_json::json;
use spectrec_core::fista::{FistaConfig, SolveReport};
use spectrec_core::image::{make_random_mask, restrict, SamplingMask, SpectrumImage};
use spectrec_core::metrics::{self, EvalReport};
use spectrec_core::phantom::Phantom;
use spectrec_core::snn::{self, SnnParams, TuningState};
use spectrec_core::sss::{self, SssParams};
use spectrec_core::{io, metrics::asad_matched};
use std::io::Write;
use std::path::Path;

/// Prints a line to stdout, exiting quietly if the consumer closed the pipe.
fn emit(line: &str) {
    let mut out = std::io::stdout();
    let result = out
        .write_all(line.as_bytes())
        .and_then(|_| out.write_all(b"\n"));
    if let Err(e) = result {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

pub fn simulate(
    height: usize,
    width: usize,
    bands: usize,
    components: usize,
    snr_db: f64,
    seed: u64,
    out_dir: &Path,
) -> Result<(), CliError> {
    if snr_db.is_nan() {
        return Err(CliError::Usage("--snr-db must not be NaN".into()));
    }
    let builder = ManifestBuilder::new("simulate");
    std::fs::create_dir_all(out_dir)?;
    let phantom = Phantom::generate(bands, height, width, components, snr_db, seed)?;
    let (noisy, sigma2) = phantom.noisy();

    let truth_path = out_dir.join("truth.sib");
    let noisy_path = out_dir.join("noisy.sib");
    let endmembers_path = out_dir.join("endmembers.sib");
    let abundances_path = out_dir.join("abundances.sib");
    let meta_path = out_dir.join("meta.json");

    io::write_sib(phantom.truth(), &truth_path)?;
    io::write_sib(&noisy, &noisy_path)?;
    // endmembers as a 1 x components image: one column per spectrum
    let endmembers_img = SpectrumImage::new(1, components, phantom.endmembers().clone())
        .map_err(|e| CliError::Data(e.to_string()))?;
    io::write_sib(&endmembers_img, &endmembers_path)?;
    let abundances_img = SpectrumImage::new(height, width, phantom.abundances().clone())
        .map_err(|e| CliError::Data(e.to_string()))?;
    io::write_sib(&abundances_img, &abundances_path)?;

    let seeds = json!({
        "master": seed,
        "endmembers": seed,
        "abundances": seed.wrapping_add(1),
        "noise": phantom.noise_seed(),
    });
    io::write_json(
        &json!({
            "nc": components,
            "snr_db": if snr_db.is_finite() { json!(snr_db) } else { json!("inf") },
            "sigma2": sigma2,
            "seeds": seeds,
        }),
        &meta_path,
    )?;

    builder
        .parameters(&json!({
            "height": height, "width": width, "bands": bands,
            "components": components,
            "snr_db": if snr_db.is_finite() { json!(snr_db) } else { json!("inf") },
        }))
        .seeds(&seeds)
        .output(&truth_path)
        .output(&noisy_path)
        .output(&endmembers_path)
        .output(&abundances_path)
        .output(&meta_path)
        .write(&out_dir.join("manifest.json"))?;
    Ok(())
}

pub fn mask(
    np: Option<usize>,
    from_image: Option<&Path>,
    ratio: f64,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let builder = ManifestBuilder::new("mask");
    let np = match (np, from_image) {
        (Some(n), None) => n,
        (None, Some(path)) => {
            let img = io::read_sib(path)?;
            img.num_pixels()
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --np and --from-image is required".into(),
            ))
        }
    };
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(CliError::Usage(format!(
            "--ratio must be in (0, 1], got {ratio}"
        )));
    }
    let ns = (ratio * np as f64).round() as usize;
    if ns == 0 {
        return Err(CliError::Usage(format!(
            "ratio {ratio} of {np} pixels rounds to an empty mask"
        )));
    }
    let mask = make_random_mask(np, ns.min(np), seed)?;
    io::write_mask(&mask, out)?;
    builder
        .parameters(&json!({"np": np, "ratio": ratio, "ns": mask.ns()}))
        .seeds(&json!({"mask": seed}))
        .output(out)
        .write(&sibling_manifest_path(out))?;
    Ok(())
}

#[derive(Serialize)]
struct ReconstructReport {
    method: String,
    lambda: f64,
    mu: Option<f64>,
    subspace: Option<SubspaceSummary>,
    tuning: Option<TuningState>,
    solve: SolveReport,
}

#[derive(Serialize)]
struct SubspaceSummary {
    dim: usize,
    sigma2_hat: f64,
}

struct LoadedProblem {
    image: SpectrumImage,
    mask: SamplingMask,
    measurements: ndarray::Array2<f64>,
}

fn load_problem(image_path: &Path, mask_path: &Path) -> Result<LoadedProblem, CliError> {
    let image = io::read_sib(image_path)?;
    if !image.all_finite() {
        eprintln!("warning: {} contains non-finite values", image_path.display());
    }
    let mask = io::read_mask(mask_path)?;
    if mask.np() != image.num_pixels() {
        return Err(CliError::Data(format!(
            "mask covers {} pixels but image has {}",
            mask.np(),
            image.num_pixels()
        )));
    }
    let measurements = restrict(&image, &mask)?;
    Ok(LoadedProblem {
        image,
        mask,
        measurements,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn reconstruct(
    method: &str,
    image_path: &Path,
    mask_path: &Path,
    lambda: Option<f64>,
    mu: Option<f64>,
    max_iters: usize,
    tol: f64,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<(), CliError> {
    let builder = ManifestBuilder::new("reconstruct");
    let problem = load_problem(image_path, mask_path)?;
    let shape = (
        problem.image.bands(),
        problem.image.height(),
        problem.image.width(),
    );
    let config = FistaConfig {
        max_iters,
        tol,
        monitor_every: 10,
    };

    let report = match method {
        "snn" => {
            let (params, tuning) = match (lambda, mu) {
                (Some(l), Some(m)) => (SnnParams::new(l, m)?, None),
                (None, None) => {
                    let model = sss::estimate_subspace(&problem.measurements)?;
                    let sigma2 = model.sigma2_hat();
                    if sigma2.is_nan() || sigma2 <= 0.0 {
                        return Err(CliError::Data(
                            "estimated noise variance is zero; pass --lambda/--mu explicitly"
                                .into(),
                        ));
                    }
                    let (params, state) =
                        snn::snn_tune(&problem.measurements, &problem.mask, shape, sigma2, &config)?;
                    (params, Some(state))
                }
                _ => {
                    return Err(CliError::Usage(
                        "--lambda and --mu must be given together (or both omitted to tune)"
                            .into(),
                    ))
                }
            };
            let (recon, solve) =
                snn::snn_reconstruct(&problem.measurements, &problem.mask, shape, &params, &config)?;
            io::write_sib(&recon, out)?;
            ReconstructReport {
                method: "snn".into(),
                lambda: params.lambda,
                mu: Some(params.mu),
                subspace: None,
                tuning,
                solve,
            }
        }
        "sss" => {
            if mu.is_some() {
                return Err(CliError::Usage("--mu does not apply to method sss".into()));
            }
            let params = match lambda {
                Some(l) => SssParams::new(l)?,
                None => SssParams::default(),
            };
            let model = sss::estimate_subspace(&problem.measurements)?;
            let (recon, solve) = sss::sss_reconstruct(
                &problem.measurements,
                &problem.mask,
                shape,
                &model,
                &params,
                &config,
            )?;
            io::write_sib(&recon, out)?;
            ReconstructReport {
                method: "sss".into(),
                lambda: params.lambda,
                mu: None,
                subspace: Some(SubspaceSummary {
                    dim: model.dim(),
                    sigma2_hat: model.sigma2_hat(),
                }),
                tuning: None,
                solve,
            }
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown method {other:?}; expected \"snn\" or \"sss\""
            )))
        }
    };

    let report_file = match report_path {
        Some(p) => p.to_path_buf(),
        None => {
            let mut name = out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "reconstruction".to_string());
            name.push_str(".report.json");
            out.with_file_name(name)
        }
    };
    io::write_json(&report, &report_file)?;

    builder
        .input(image_path)
        .input(mask_path)
        .parameters(&json!({
            "method": report.method,
            "lambda": report.lambda,
            "mu": report.mu,
            "max_iters": max_iters,
            "tol": tol,
            "tuned": report.tuning.is_some(),
        }))
        .output(out)
        .output(&report_file)
        .write(&sibling_manifest_path(out))?;
    Ok(())
}

pub fn tune(
    image_path: &Path,
    mask_path: &Path,
    max_iters: usize,
    tol: f64,
    out: &Path,
) -> Result<(), CliError> {
    let builder = ManifestBuilder::new("tune");
    let problem = load_problem(image_path, mask_path)?;
    let shape = (
        problem.image.bands(),
        problem.image.height(),
        problem.image.width(),
    );
    let model = sss::estimate_subspace(&problem.measurements)?;
    let sigma2 = model.sigma2_hat();
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(CliError::Data(
            "estimated noise variance is zero; nothing to tune against".into(),
        ));
    }
    let config = FistaConfig {
        max_iters,
        tol,
        monitor_every: 0,
    };
    let (params, state) = snn::snn_tune(&problem.measurements, &problem.mask, shape, sigma2, &config)?;
    io::write_json(&state, out)?;
    emit(&format!(
        "lambda_star = {}, mu_star = {}, residual_mse = {}, sigma2_hat = {}",
        params.lambda, params.mu, state.final_residual_mse, state.sigma2_hat
    ));
    builder
        .input(image_path)
        .input(mask_path)
        .parameters(&json!({
            "max_iters": max_iters,
            "tol": tol,
            "lambda_star": params.lambda,
            "mu_star": params.mu,
        }))
        .output(out)
        .write(&sibling_manifest_path(out))?;
    Ok(())
}

pub fn eval(
    truth_path: &Path,
    estimate_path: &Path,
    endmembers_path: Option<&Path>,
    abundances_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let builder = ManifestBuilder::new("eval");
    let truth = io::read_sib(truth_path)?;
    let estimate = io::read_sib(estimate_path)?;
    let nmse_image = metrics::nmse(&truth.data().view(), &estimate.data().view())?;

    let mut report = EvalReport {
        nmse_image,
        asad: None,
        nmse_abundance: None,
        per_component_sad: Vec::new(),
    };

    match (endmembers_path, abundances_path) {
        (Some(em_path), Some(ab_path)) => {
            let endmembers = io::read_sib(em_path)?.into_data();
            let abundances = io::read_sib(ab_path)?.into_data();
            let inverted = metrics::invert_abundance_matrix(
                &estimate.data().view(),
                &endmembers.view(),
                false,
            )?;
            report.nmse_abundance =
                Some(metrics::nmse(&abundances.view(), &inverted.view())?);
            let refit =
                metrics::refit_endmembers(&estimate.data().view(), &abundances.view())?;
            let (mean, per_component) = asad_matched(&endmembers.view(), &refit.view())?;
            report.asad = Some(mean);
            report.per_component_sad = per_component;
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Usage(
                "--endmembers and --abundances must be given together".into(),
            ))
        }
    }

    emit(&serde_json::to_string_pretty(&report).expect("serializable report"));
    if let Some(out) = out {
        io::write_json(&report, out)?;
        builder
            .input(truth_path)
            .input(estimate_path)
            .parameters(&json!({
                "with_factors": endmembers_path.is_some(),
            }))
            .output(out)
            .write(&sibling_manifest_path(out))?;
    }
    Ok(())
}

pub fn pca_diag(image_path: &Path, mask_path: &Path, out_csv: &Path) -> Result<(), CliError> {
    let builder = ManifestBuilder::new("pca-diag");
    let problem = load_problem(image_path, mask_path)?;
    let model = sss::estimate_subspace(&problem.measurements)?;
    io::write_text(&model.eigen_diagnostics_csv(), out_csv)?;
    emit(&format!("R = {}, sigma2_hat = {}", model.dim(), model.sigma2_hat()));
    builder
        .input(image_path)
        .input(mask_path)
        .parameters(&json!({"bands": model.bands(), "dim": model.dim(), "sigma2_hat": model.sigma2_hat()}))
        .output(out_csv)
        .write(&sibling_manifest_path(out_csv))?;
    Ok(())
}
