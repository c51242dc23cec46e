use std::path::{Path, PathBuf};
use std::process::Command;

use inrr::harness::run::residual;
use inrr::harness::{git_blob_hash, ntk_sweep, run_experiment, ExperimentConfig, Task};
use inrr::tasks::{load_pgm, MaskKind};

fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn shipped(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(repo_path(&format!("configs/{name}.toml"))).unwrap()
}

fn small_inpaint(out: &Path) -> String {
    format!(
        r#"
[experiment]
task = "inpaint"
seed = 3
steps = 20
log_every = 10
out_dir = "{}"

[image]
source = "file"
path = "{}"
downsample = 4

[mask]
kind = "patch"
rects = [{{ row = 4, col = 4, height = 4, width = 4 }}]

[model]
family = "siren"
hidden = [8, 8]
omega0 = 10.0

[regularizer]
kind = "inrr"
lambda_r = 1.0
lambda_c = 1.0
rank = 2
tiny_hidden = [4]
"#,
        out.display(),
        repo_path("data/cameraman_64.pgm").display()
    )
}

#[test]
fn fit_task_reaches_30_db() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("fit_synthetic");
    cfg.experiment.out_dir = dir.path().to_path_buf();
    let report = run_experiment(&cfg, None).unwrap();
    let first = report.log.first().unwrap();
    let last = report.log.last().unwrap();
    assert_eq!(last.step, 2000);
    assert!(last.observed_mse < first.observed_mse);
    assert!(last.psnr > 30.0, "final PSNR {}", last.psnr);
}

#[test]
fn sparser_sampling_prefers_smaller_delta() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("sweep_delta");
    cfg.experiment.out_dir = dir.path().to_path_buf();
    let report = ntk_sweep(&cfg).unwrap();
    assert!(report.cells.iter().all(|c| c.error.is_none()), "{:?}", report.cells);
    let dense = report.best_value(0.3).unwrap();
    let sparse = report.best_value(0.8).unwrap();
    assert!(
        dense >= sparse,
        "best δ at 30% missing {dense}, at 80% missing {sparse}"
    );
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + report.cells.len());
}

#[test]
fn one_cell_sweep_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shipped("sweep_omega0");
    cfg.experiment.out_dir = dir.path().to_path_buf();
    cfg.experiment.steps = 40;
    let sweep = cfg.sweep.as_mut().unwrap();
    sweep.values = vec![20.0];
    sweep.missing_rates = vec![0.5];
    let cell = ntk_sweep(&cfg).unwrap().cells[0].psnr.unwrap();

    let mut direct = cfg.clone();
    direct.experiment.task = Task::Inpaint;
    direct.experiment.out_dir = dir.path().join("direct");
    direct.mask = Some(MaskKind::Random { p: 0.5 });
    direct.model.omega0 = 20.0;
    direct.sweep = None;
    let run = run_experiment(&direct, None).unwrap();
    assert_eq!(cell, run.final_metrics.psnr);
}

#[test]
fn residual_matches_independent_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml(&small_inpaint(dir.path())).unwrap();
    let report = run_experiment(&cfg, None).unwrap();
    let clean = inrr::tasks::box_downsample(&load_pgm(repo_path("data/cameraman_64.pgm")).unwrap().pixels, 4).unwrap();
    let expect = residual(&report.prediction, &clean).unwrap();
    for k in 0..clean.len() {
        let d = (report.prediction.as_slice()[k] - clean.as_slice()[k]).abs();
        assert_eq!(report.residual.as_slice()[k], d);
        assert_eq!(expect.as_slice()[k], d);
    }
    let saved = load_pgm(dir.path().join("residual.pgm")).unwrap().pixels;
    for k in 0..clean.len() {
        let d = report.residual.as_slice()[k].min(1.0);
        assert!((saved.as_slice()[k] - d).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

#[test]
fn manifest_records_config_and_input_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, small_inpaint(&dir.path().join("out"))).unwrap();
    let cfg = ExperimentConfig::load(&cfg_path).unwrap();
    run_experiment(&cfg, Some(&cfg_path)).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    let config_hash = git_blob_hash(&std::fs::read(&cfg_path).unwrap());
    let image_hash = git_blob_hash(&std::fs::read(repo_path("data/cameraman_64.pgm")).unwrap());
    assert!(manifest.contains(&format!("config {config_hash}")));
    assert!(manifest.contains(&format!("input {image_hash}")));
    assert!(manifest.contains("[resolved_config]"));
    assert!(manifest.contains("trajectory.csv"));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_inrr")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, small_inpaint(&dir.path().join("good"))).unwrap();
    let out_dir = dir.path().join("override");
    let ok = cli(&[
        "run",
        good.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 9"));

    let missing = cli(&["run", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[experiment]\ntask = \"inpaint\"\nsteps = 0\n").unwrap();
    assert_eq!(cli(&["run", bad.to_str().unwrap()]).status.code(), Some(2));

    let unknown = dir.path().join("unknown.toml");
    std::fs::write(
        &unknown,
        small_inpaint(dir.path()).replace("omega0 = 10.0", "omega0 = 10.0\nwidth = 3"),
    )
    .unwrap();
    assert_eq!(cli(&["run", unknown.to_str().unwrap()]).status.code(), Some(2));

    let diverge = dir.path().join("diverge.toml");
    let text = small_inpaint(&dir.path().join("diverge"))
        .replace("family = \"siren\"", "family = \"dmf\"")
        .replace("kind = \"inrr\"", "kind = \"none\"")
        + "\n[optimizer]\nlr = 1e100\n";
    std::fs::write(&diverge, text).unwrap();
    let failed = cli(&["run", diverge.to_str().unwrap()]);
    assert_eq!(
        failed.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&failed.stderr)
    );
    assert!(dir.path().join("diverge/checkpoint.toml").is_file());

    let sweep_without_section = cli(&["sweep", good.to_str().unwrap()]);
    assert_eq!(sweep_without_section.status.code(), Some(2));
}
