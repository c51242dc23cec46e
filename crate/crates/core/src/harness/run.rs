use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::harness::config::{
    BiasFamily, ExperimentConfig, ImageSource, ModelFamily, ModelSection, SweepParameter, SweepSection, Task,
};
use crate::harness::heatmap::{export_heatmap, ColorScale};
use crate::harness::log::{LogRow, TrajectoryLog};
use crate::harness::manifest::{git_blob_hash, hash_file, Manifest};
use crate::harness::model::{build_regularizer, derived_seed, Model};
use crate::harness::train::{train, TaskData, TrainOptions, TrainOutcome};
use crate::models::network::sample_feature_matrix;
use crate::models::NetworkSpec;
use crate::ntk::{composed_kernel, fit_h_ntk, gaussian_limit_kernel, kernel_inpaint, FittedH, KernelProvenance};
use crate::numerics::linalg::RidgePolicy;
use crate::numerics::DenseMatrix;
use crate::regularizers::RegularizerState;
use crate::rng::{seeded, streams};
use crate::tasks::{
    add_noise, box_downsample, gen_mask, load_pgm, psnr, save_mask, save_pgm, synthetic_ring, Mask, MaskKind,
    MaskedImage,
};

/// Clean image named by the config.
pub fn load_clean(source: &ImageSource) -> Result<(DenseMatrix, String)> {
    match source {
        ImageSource::File { path, downsample } => {
            let img = load_pgm(path)?;
            let pixels = if *downsample > 1 {
                box_downsample(&img.pixels, *downsample)?
            } else {
                img.pixels
            };
            Ok((pixels, img.name))
        }
        ImageSource::SyntheticRing { rows, cols } => Ok((synthetic_ring(*rows, *cols), "synthetic_ring".into())),
    }
}

/// Builds the training target: masked for inpainting, noisy for denoising,
/// fully observed for fitting.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<TaskData> {
    let (clean, name) = load_clean(&cfg.image)?;
    let (m, n) = clean.shape();
    let seed = cfg.experiment.seed;
    let mask = match &cfg.mask {
        Some(kind) => gen_mask(kind, m, n, seed)?,
        None if cfg.experiment.task == Task::Inpaint => {
            return Err(Error::Config("inpaint task needs a [mask] section".into()))
        }
        None => Mask::all_observed(m, n),
    };
    let observed = match (&cfg.noise, cfg.experiment.task) {
        (Some(noise), Task::Denoise) => add_noise(&clean, noise, seed)?,
        _ => clean.clone(),
    };
    Ok(TaskData {
        target: MaskedImage::new(observed, mask, name)?,
        clean,
    })
}

pub fn train_options(cfg: &ExperimentConfig) -> TrainOptions {
    TrainOptions {
        steps: cfg.experiment.steps,
        log_every: cfg.experiment.log_every,
        freeze_at: cfg.experiment.freeze_at,
        heatmap_steps: cfg.experiment.heatmap_steps.clone(),
        snapshot_every: None,
    }
}

/// Trains the configured model in memory, without writing artifacts.
pub fn train_config(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<(TaskData, TrainOutcome)> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let seed = cfg.experiment.seed;
    let model = Model::build(&cfg.model, &data.target, seed)?;
    let reg = build_regularizer(&cfg.regularizer, data.target.shape(), seed)?;
    let out = train(model, reg, &data, &train_options(cfg), &cfg.optimizer, checkpoint)?;
    Ok((data, out))
}

/// Final metrics and written files of a run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub final_metrics: LogRow,
    pub log: TrajectoryLog,
    pub prediction: DenseMatrix,
    pub residual: DenseMatrix,
    pub artifacts: Vec<PathBuf>,
}

/// `|X − X*|` pixelwise.
pub fn residual(prediction: &DenseMatrix, clean: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(prediction.sub(clean)?.map(f64::abs))
}

fn input_hashes(cfg: &ExperimentConfig, config_path: Option<&Path>) -> Result<Vec<(String, String, PathBuf)>> {
    let mut out = Vec::new();
    match config_path {
        Some(p) => out.push(("config".into(), hash_file(p)?, p.to_path_buf())),
        None => out.push((
            "config".into(),
            git_blob_hash(cfg.to_toml()?.as_bytes()),
            PathBuf::from("<in-memory>"),
        )),
    }
    for f in cfg.input_files() {
        out.push(("input".into(), hash_file(&f)?, f));
    }
    Ok(out)
}

fn write_text(path: PathBuf, text: &str, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    write_atomic(&path, text.as_bytes())?;
    artifacts.push(path);
    Ok(())
}

fn write_image(path: PathBuf, m: &DenseMatrix, artifacts: &mut Vec<PathBuf>) -> Result<()> {
    save_pgm(m, &path)?;
    artifacts.push(path);
    Ok(())
}

/// Runs an inpaint, denoise or fit experiment and writes its artifacts to
/// `cfg.experiment.out_dir`: `recovered.pgm`, `residual.pgm`, `observed.pgm`,
/// `mask.pgm`, `trajectory.csv`, `timing.csv`, Laplacian heatmaps and
/// `manifest.txt`. A non-finite loss leaves `checkpoint.toml` behind.
pub fn run_experiment(cfg: &ExperimentConfig, config_path: Option<&Path>) -> Result<RunReport> {
    if matches!(cfg.experiment.task, Task::NtkSweep | Task::ImplicitBias) {
        return Err(Error::Config(format!(
            "task {:?} is run by the sweep/bias commands",
            cfg.experiment.task
        )));
    }
    cfg.validate()?;
    let out_dir = &cfg.experiment.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (data, out) = train_config(cfg, Some(&out_dir.join("checkpoint.toml")))?;

    let mut artifacts = Vec::new();
    let res = residual(&out.prediction, &data.clean)?;
    write_image(
        out_dir.join("recovered.pgm"),
        &out.prediction.map(|v| v.clamp(0.0, 1.0)),
        &mut artifacts,
    )?;
    write_image(out_dir.join("residual.pgm"), &res.map(|v| v.min(1.0)), &mut artifacts)?;
    write_image(out_dir.join("observed.pgm"), &data.target.pixels, &mut artifacts)?;
    let mask_path = out_dir.join("mask.pgm");
    save_mask(&data.target.mask, &mask_path)?;
    artifacts.push(mask_path);
    write_text(out_dir.join("trajectory.csv"), &out.log.to_csv(), &mut artifacts)?;
    write_text(out_dir.join("timing.csv"), &out.log.timing_csv(), &mut artifacts)?;
    if !out.laplacians.is_empty() {
        let dir = out_dir.join("heatmaps");
        for (step, lr, lc) in &out.laplacians {
            for (side, l) in [("rows", lr), ("cols", lc)] {
                let path = dir.join(format!("laplacian_{side}_step{step}.pgm"));
                export_heatmap(l, &path, ColorScale::Linear)?;
                artifacts.push(path);
            }
        }
    }
    let final_metrics = *out.log.last().expect("final step is logged");
    let manifest = Manifest {
        task: format!("{:?}", cfg.experiment.task).to_lowercase(),
        seed: cfg.experiment.seed,
        inputs: input_hashes(cfg, config_path)?,
        artifacts: artifacts.clone(),
        resolved_config: cfg.to_toml()?,
        results: vec![
            ("regularizer".into(), out.reg.name().into()),
            ("final_psnr".into(), final_metrics.psnr.to_string()),
            ("final_psnr_full".into(), final_metrics.psnr_full.to_string()),
            ("final_observed_mse".into(), final_metrics.observed_mse.to_string()),
            ("final_unobserved_mse".into(), final_metrics.unobserved_mse.to_string()),
        ],
    };
    let manifest_path = out_dir.join("manifest.txt");
    manifest.write(&manifest_path)?;
    artifacts.push(manifest_path);
    Ok(RunReport {
        final_metrics,
        log: out.log,
        prediction: out.prediction,
        residual: res,
        artifacts,
    })
}

/// One cell of an NTK/frequency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub missing_rate: f64,
    /// Unobserved-pixel PSNR; `None` when the cell failed.
    pub psnr: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub parameter: SweepParameter,
    pub cells: Vec<SweepCell>,
    pub csv_path: Option<PathBuf>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let name = match self.parameter {
            SweepParameter::Delta => "delta",
            SweepParameter::Omega0 => "omega0",
        };
        let mut out = String::from("parameter,value,missing_rate,psnr,error\n");
        for c in &self.cells {
            let psnr = c.psnr.map(|p| p.to_string()).unwrap_or_default();
            let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(out, "{name},{},{},{psnr},{err}", c.value, c.missing_rate);
        }
        out
    }

    /// Value with the highest PSNR at the given missing rate.
    pub fn best_value(&self, missing_rate: f64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.missing_rate == missing_rate)
            .filter_map(|c| c.psnr.map(|p| (c.value, p)))
            .fold(None, |best: Option<(f64, f64)>, (v, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((v, p)),
            })
            .map(|(v, _)| v)
    }
}

/// Fits the scalar map `h` of the ReLU NTK used by the δ sweep.
pub fn sweep_h(sweep: &SweepSection, seed: u64) -> Result<FittedH> {
    let spec = NetworkSpec::relu(2, 1, sweep.h_hidden.clone());
    fit_h_ntk(&spec, sweep.h_knots, sweep.h_samples, derived_seed(seed, streams::NTK))
}

/// Kernel-regression inpainting with the composed NTK at bandwidth `delta`.
/// Uses `D` sampled features when `features` is set, the Gaussian limit
/// otherwise.
pub fn kernel_regression_inpaint(
    target: &MaskedImage,
    h: &FittedH,
    delta: f64,
    features: Option<usize>,
    seed: u64,
) -> Result<DenseMatrix> {
    let pred = match features {
        Some(d) => {
            let mut rng = seeded(seed, streams::FEATURES);
            let b = sample_feature_matrix(d, 2, delta, &mut rng);
            kernel_inpaint(
                target,
                |x, y| composed_kernel(&b, |t| h.eval(t), x, y),
                KernelProvenance::Composed { features: d, delta },
                RidgePolicy::Auto,
            )?
            .0
        }
        None => {
            kernel_inpaint(
                target,
                |x, y| gaussian_limit_kernel(|t| h.eval(t), delta, x, y),
                KernelProvenance::GaussianLimit { delta },
                RidgePolicy::Auto,
            )?
            .0
        }
    };
    Ok(pred)
}

fn sweep_cell(cfg: &ExperimentConfig, sweep: &SweepSection, h: Option<&FittedH>, value: f64, p: f64) -> Result<f64> {
    let mut cell = cfg.clone();
    cell.mask = Some(MaskKind::Random { p });
    match sweep.parameter {
        SweepParameter::Delta => {
            let data = prepare_data(&cell)?;
            let pred = kernel_regression_inpaint(
                &data.target,
                h.expect("h fitted for delta sweeps"),
                value,
                sweep.features,
                cfg.experiment.seed,
            )?;
            psnr(&pred, &data.clean, Some(&data.eval_mask()))
        }
        SweepParameter::Omega0 => {
            cell.experiment.task = Task::Inpaint;
            cell.model.omega0 = value;
            cell.sweep = None;
            let (_, out) = train_config(&cell, None)?;
            Ok(out.log.last().expect("final step is logged").psnr)
        }
    }
}

/// Runs every `(value, missing rate)` cell; failed cells are recorded and
/// the sweep continues. Writes `sweep.csv` to the output directory.
pub fn ntk_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("ntk_sweep needs a [sweep] section".into()))?;
    let h = match sweep.parameter {
        SweepParameter::Delta => Some(sweep_h(sweep, cfg.experiment.seed)?),
        SweepParameter::Omega0 => None,
    };
    let mut cells = Vec::new();
    for &p in &sweep.missing_rates {
        for &value in &sweep.values {
            let (psnr, error) = match sweep_cell(cfg, sweep, h.as_ref(), value, p) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(SweepCell {
                value,
                missing_rate: p,
                psnr,
                error,
            });
        }
    }
    let mut report = SweepReport {
        parameter: sweep.parameter,
        cells,
        csv_path: None,
    };
    let out_dir = &cfg.experiment.out_dir;
    let path = out_dir.join("sweep.csv");
    write_atomic(&path, report.to_csv().as_bytes())?;
    report.csv_path = Some(path);
    Ok(report)
}

/// Effective-rank trajectory of one model family.
#[derive(Debug, Clone)]
pub struct BiasRun {
    pub family: BiasFamily,
    /// Metrics of the initialization, before any update.
    pub initial: LogRow,
    /// Metrics at each cadence step `k · log_every`, `k ≥ 1`, and the final step.
    pub log: TrajectoryLog,
    pub snapshots: Vec<(usize, DenseMatrix)>,
}

fn bias_model(family: BiasFamily, cfg: &ExperimentConfig, target: &MaskedImage) -> Result<Model> {
    let base = &cfg.model;
    let section = match family {
        BiasFamily::Dmf1 | BiasFamily::Dmf3 => ModelSection {
            family: ModelFamily::Dmf,
            depth: if family == BiasFamily::Dmf1 { 1 } else { 3 },
            ..base.clone()
        },
        BiasFamily::Relu => ModelSection {
            family: ModelFamily::Relu,
            features: None,
            delta: None,
            ..base.clone()
        },
        BiasFamily::Siren => ModelSection {
            family: ModelFamily::Siren,
            ..base.clone()
        },
    };
    Model::build(&section, target, cfg.experiment.seed)
}

/// Trains one model of `family` without regularization and logs its
/// effective rank.
pub fn bias_run(cfg: &ExperimentConfig, data: &TaskData, family: BiasFamily) -> Result<BiasRun> {
    let bias = cfg
        .bias
        .as_ref()
        .ok_or_else(|| Error::Config("implicit_bias needs a [bias] section".into()))?;
    let model = bias_model(family, cfg, &data.target)?;
    let mut optimizer = cfg.optimizer.clone();
    if matches!(family, BiasFamily::Dmf1 | BiasFamily::Dmf3) {
        optimizer.lr = bias.dmf_lr;
    }
    let opts = TrainOptions {
        snapshot_every: Some(bias.snapshot_every.unwrap_or(cfg.experiment.log_every)),
        heatmap_steps: Vec::new(),
        freeze_at: None,
        ..train_options(cfg)
    };
    let out = train(model, RegularizerState::None, data, &opts, &optimizer, None)?;
    let (first, rest) = out.log.rows().split_first().expect("step 0 is logged");
    let mut log = TrajectoryLog::new();
    for (row, wall) in rest.iter().zip(&out.log.wall_seconds()[1..]) {
        log.push(*row, *wall)?;
    }
    Ok(BiasRun {
        family,
        initial: *first,
        log,
        snapshots: out.snapshots,
    })
}

/// Runs every configured family and writes `bias_<family>.csv`, a
/// `bias_summary.csv` of initial and final metrics, and PGM snapshots under
/// `snapshots/`.
pub fn implicit_bias_study(cfg: &ExperimentConfig) -> Result<Vec<BiasRun>> {
    cfg.validate()?;
    let bias = cfg
        .bias
        .as_ref()
        .ok_or_else(|| Error::Config("implicit_bias needs a [bias] section".into()))?;
    let data = prepare_data(cfg)?;
    let out_dir = &cfg.experiment.out_dir;
    let mut runs = Vec::new();
    let mut summary = String::from("family,initial_effective_rank,final_effective_rank,initial_psnr,final_psnr\n");
    for &family in &bias.families {
        let run = bias_run(cfg, &data, family)?;
        let name = family.name();
        write_atomic(&out_dir.join(format!("bias_{name}.csv")), run.log.to_csv().as_bytes())?;
        for (step, snap) in &run.snapshots {
            save_pgm(
                &snap.map(|v| v.clamp(0.0, 1.0)),
                out_dir.join("snapshots").join(format!("{name}_step{step}.pgm")),
            )?;
        }
        let last = run.log.last().expect("final step is logged");
        let _ = writeln!(
            summary,
            "{name},{},{},{},{}",
            run.initial.effective_rank, last.effective_rank, run.initial.psnr, last.psnr
        );
        runs.push(run);
    }
    write_atomic(&out_dir.join("bias_summary.csv"), summary.as_bytes())?;
    Ok(runs)
}
