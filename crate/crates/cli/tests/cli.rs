//! End-to-end tests of the command-line interface, driving the built
//! binary through every subcommand.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spectrec_core::image::SpectrumImage;
use spectrec_core::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spectrec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spectrec"))
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "spectrec-cli-{tag}-{}-{}",
        std::process::id(),
        rand::random::<u32>()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn spectrec");
    assert!(
        out.status.success(),
        "command failed ({:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("spawn spectrec").status.code().unwrap_or(-1)
}

fn simulate_small(dir: &Path, seed: u64) {
    run_ok(spectrec().args([
        "simulate",
        "--height",
        "12",
        "--width",
        "10",
        "--bands",
        "24",
        "--components",
        "3",
        "--snr-db",
        "25",
        "--seed",
        &seed.to_string(),
        "--out-dir",
        dir.to_str().unwrap(),
    ]));
}

#[test]
fn simulate_writes_consistent_outputs() {
    let dir = tempdir("simulate");
    simulate_small(&dir, 5);
    for name in [
        "truth.sib",
        "noisy.sib",
        "endmembers.sib",
        "abundances.sib",
        "meta.json",
        "manifest.json",
    ] {
        assert!(dir.join(name).exists(), "{name} missing");
    }
    let truth = io::read_sib(&dir.join("truth.sib")).unwrap();
    assert_eq!(
        (truth.bands(), truth.height(), truth.width()),
        (24, 12, 10)
    );
    assert_eq!(truth.num_pixels(), 120);
    let endmembers = io::read_sib(&dir.join("endmembers.sib")).unwrap();
    assert_eq!((endmembers.bands(), endmembers.num_pixels()), (24, 3));
    let abundances = io::read_sib(&dir.join("abundances.sib")).unwrap();
    assert_eq!((abundances.bands(), abundances.num_pixels()), (3, 120));
    // truth = endmembers * abundances, bit for bit
    let rebuilt = endmembers.data().dot(abundances.data());
    assert_eq!(&rebuilt, truth.data());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["nc"], 3);
    assert!(meta["sigma2"].as_f64().unwrap() > 0.0);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn simulate_is_deterministic_across_runs() {
    let dir_a = tempdir("sim-a");
    let dir_b = tempdir("sim-b");
    simulate_small(&dir_a, 9);
    simulate_small(&dir_b, 9);
    for name in ["truth.sib", "noisy.sib", "endmembers.sib", "abundances.sib"] {
        let a = std::fs::read(dir_a.join(name)).unwrap();
        let b = std::fs::read(dir_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    std::fs::remove_dir_all(dir_a).ok();
    std::fs::remove_dir_all(dir_b).ok();
}

#[test]
fn mask_ratio_and_validation() {
    let dir = tempdir("mask");
    let path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--np",
        "10000",
        "--ratio",
        "0.2",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]));
    let mask = io::read_mask(&path).unwrap();
    assert_eq!(mask.ns(), 2000);
    assert!((mask.ratio() - 0.2).abs() < 1e-12);

    let full = dir.join("full.json");
    run_ok(spectrec().args([
        "mask", "--np", "25", "--ratio", "1.0", "--out",
        full.to_str().unwrap(),
    ]));
    let mask = io::read_mask(&full).unwrap();
    assert_eq!(mask.indices(), (0..25).collect::<Vec<_>>().as_slice());

    // ratio 0 is a usage error
    let code = exit_code(spectrec().args([
        "mask", "--np", "25", "--ratio", "0.0", "--out",
        dir.join("bad.json").to_str().unwrap(),
    ]));
    assert_eq!(code, 2);

    // --np and --from-image together is a usage error
    let code = exit_code(spectrec().args([
        "mask",
        "--np",
        "25",
        "--from-image",
        "whatever.sib",
        "--ratio",
        "0.5",
        "--out",
        dir.join("bad2.json").to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn mask_from_image_header() {
    let dir = tempdir("mask-img");
    simulate_small(&dir, 1);
    let path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--from-image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--ratio",
        "0.5",
        "--out",
        path.to_str().unwrap(),
    ]));
    let mask = io::read_mask(&path).unwrap();
    assert_eq!(mask.np(), 120);
    assert_eq!(mask.ns(), 60);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn reconstruct_snn_identity_on_full_mask() {
    let dir = tempdir("recon-id");
    simulate_small(&dir, 2);
    let mask_path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--np",
        "120",
        "--ratio",
        "1.0",
        "--out",
        mask_path.to_str().unwrap(),
    ]));
    let out = dir.join("recon.sib");
    run_ok(spectrec().args([
        "reconstruct",
        "--method",
        "snn",
        "--image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--lambda",
        "0",
        "--mu",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]));
    let noisy = io::read_sib(&dir.join("noisy.sib")).unwrap();
    let recon = io::read_sib(&out).unwrap();
    for (a, b) in noisy.data().iter().zip(recon.data().iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(dir.join("recon.sib.report.json").exists());
    assert!(dir.join("recon.sib.manifest.json").exists());
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn reconstruct_sss_defaults_lambda_to_one() {
    let dir = tempdir("recon-sss");
    simulate_small(&dir, 3);
    let mask_path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--np",
        "120",
        "--ratio",
        "0.5",
        "--seed",
        "8",
        "--out",
        mask_path.to_str().unwrap(),
    ]));
    let out = dir.join("recon.sib");
    run_ok(spectrec().args([
        "reconstruct",
        "--method",
        "sss",
        "--image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("recon.sib.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["method"], "sss");
    assert_eq!(report["lambda"].as_f64().unwrap(), 1.0);
    assert!(report["subspace"]["dim"].as_u64().unwrap() >= 1);
    assert!(report["solve"]["iterations"].as_u64().unwrap() >= 1);
    // --mu with sss is a usage error
    let code = exit_code(spectrec().args([
        "reconstruct",
        "--method",
        "sss",
        "--image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--mu",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn reconstruct_snn_tunes_when_weights_omitted() {
    let dir = tempdir("recon-tune");
    simulate_small(&dir, 4);
    let mask_path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--np",
        "120",
        "--ratio",
        "0.5",
        "--seed",
        "2",
        "--out",
        mask_path.to_str().unwrap(),
    ]));
    let out = dir.join("recon.sib");
    run_ok(spectrec().args([
        "reconstruct",
        "--method",
        "snn",
        "--image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--max-iters",
        "150",
        "--tol",
        "1e-5",
        "--out",
        out.to_str().unwrap(),
    ]));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("recon.sib.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["method"], "snn");
    assert!(report["tuning"].is_object(), "tuning block missing");
    let lambda = report["lambda"].as_f64().unwrap();
    let mu = report["mu"].as_f64().unwrap();
    assert!(lambda >= 0.0 && mu >= 0.0);
    assert_eq!(report["tuning"]["lambda_star"].as_f64().unwrap(), lambda);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("recon.sib.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["parameters"]["tuned"], true);
    // one weight alone is a usage error
    let code = exit_code(spectrec().args([
        "reconstruct",
        "--method",
        "snn",
        "--image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--lambda",
        "1.0",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn tune_is_deterministic_and_reports_consistency() {
    let dir = tempdir("tune");
    simulate_small(&dir, 6);
    let mask_path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--np",
        "120",
        "--ratio",
        "0.5",
        "--seed",
        "4",
        "--out",
        mask_path.to_str().unwrap(),
    ]));
    let out_a = dir.join("tuning-a.json");
    let out_b = dir.join("tuning-b.json");
    for out in [&out_a, &out_b] {
        run_ok(spectrec().args([
            "tune",
            "--image",
            dir.join("noisy.sib").to_str().unwrap(),
            "--mask",
            mask_path.to_str().unwrap(),
            "--max-iters",
            "150",
            "--tol",
            "1e-5",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap(),
        "tuning outputs differ between identical runs"
    );
    let state: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_a).unwrap()).unwrap();
    let lambda_star = state["lambda_star"].as_f64().unwrap();
    let mu_star = state["mu_star"].as_f64().unwrap();
    assert!(lambda_star >= 0.0 && mu_star >= 0.0);
    let residual = state["final_residual_mse"].as_f64().unwrap();
    let sigma2 = state["sigma2_hat"].as_f64().unwrap();
    assert!(
        (residual - sigma2).abs() <= 0.10 * sigma2,
        "tuned residual {residual} not within 10% of sigma2 {sigma2}"
    );
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn eval_reports_metrics() {
    let dir = tempdir("eval");
    simulate_small(&dir, 7);
    // identical estimate: nmse 0
    let out = run_ok(spectrec().args([
        "eval",
        "--truth",
        dir.join("truth.sib").to_str().unwrap(),
        "--estimate",
        dir.join("truth.sib").to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert_eq!(report["nmse_image"].as_f64().unwrap(), 0.0);
    assert!(report["asad"].is_null());

    // with factors: all three metrics present
    let out = run_ok(spectrec().args([
        "eval",
        "--truth",
        dir.join("truth.sib").to_str().unwrap(),
        "--estimate",
        dir.join("noisy.sib").to_str().unwrap(),
        "--endmembers",
        dir.join("endmembers.sib").to_str().unwrap(),
        "--abundances",
        dir.join("abundances.sib").to_str().unwrap(),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    assert!(report["nmse_image"].as_f64().unwrap() > 0.0);
    assert!(report["asad"].as_f64().unwrap() >= 0.0);
    assert!(report["nmse_abundance"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["per_component_sad"].as_array().unwrap().len(), 3);

    // factors must come together
    let code = exit_code(spectrec().args([
        "eval",
        "--truth",
        dir.join("truth.sib").to_str().unwrap(),
        "--estimate",
        dir.join("noisy.sib").to_str().unwrap(),
        "--endmembers",
        dir.join("endmembers.sib").to_str().unwrap(),
    ]));
    assert_eq!(code, 2);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn pca_diag_writes_table_and_rejects_pure_noise() {
    let dir = tempdir("pca");
    simulate_small(&dir, 8);
    let mask_path = dir.join("mask.json");
    run_ok(spectrec().args([
        "mask",
        "--np",
        "120",
        "--ratio",
        "0.8",
        "--out",
        mask_path.to_str().unwrap(),
    ]));
    let csv_path = dir.join("eigs.csv");
    let out = run_ok(spectrec().args([
        "pca-diag",
        "--image",
        dir.join("noisy.sib").to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--out-csv",
        csv_path.to_str().unwrap(),
    ]));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("R = "), "missing dimension printout: {stdout}");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines.len(), 1 + 24, "one row per band plus header");
    // weights column is non-decreasing over the signal rows
    let mut last = 0.0_f64;
    for line in &lines[1..] {
        let weight = line.rsplit(',').next().unwrap();
        if weight == "inf" {
            break;
        }
        let w: f64 = weight.parse().unwrap();
        assert!(w >= last, "weights not non-decreasing");
        last = w;
    }

    // pure noise input fails cleanly with a data error
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let noise = Array2::from_shape_fn((16, 120), |_| 0.2 * rng.sample::<f64, _>(StandardNormal));
    let noise_img = SpectrumImage::new(12, 10, noise).unwrap();
    let noise_path = dir.join("noise.sib");
    io::write_sib(&noise_img, &noise_path).unwrap();
    let code = exit_code(spectrec().args([
        "pca-diag",
        "--image",
        noise_path.to_str().unwrap(),
        "--mask",
        mask_path.to_str().unwrap(),
        "--out-csv",
        dir.join("noise.csv").to_str().unwrap(),
    ]));
    assert_eq!(code, 3);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn missing_input_is_a_data_error() {
    let code = exit_code(spectrec().args([
        "pca-diag",
        "--image",
        "/nonexistent/image.sib",
        "--mask",
        "/nonexistent/mask.json",
        "--out-csv",
        "/tmp/unused.csv",
    ]));
    assert_eq!(code, 3);
}

#[test]
fn bad_thread_env_is_a_usage_error() {
    let code = spectrec()
        .env("SPECTREC_THREADS", "zero")
        .args(["mask", "--np", "10", "--ratio", "0.5", "--out", "/tmp/unused-mask.json"])
        .output()
        .unwrap()
        .status
        .code()
        .unwrap();
    assert_eq!(code, 2);
}
