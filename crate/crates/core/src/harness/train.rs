//! The training loop.
//!
//! Each step builds a fresh graph, forms
//! `loss = Σ_observed (X − Z)² + λ_r R(θ_r) + λ_c R(θ_c)` once, and applies a
//! single Adam update to the joint parameter set `{θ, θ_r, θ_c}`.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::harness::config::OptimizerSection;
use crate::harness::log::{LogRow, TrajectoryLog};
use crate::harness::model::Model;
use crate::numerics::{AdamState, DenseMatrix, Graph};
use crate::regularizers::{record_objective, RegularizerState};
use crate::tasks::metrics::psnr_from_mse;
use crate::tasks::{effective_rank, mse, Mask, MaskedImage};

/// Training target plus the clean reference used for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub clean: DenseMatrix,
    pub target: MaskedImage,
}

impl TaskData {
    /// Pixels scored as "unobserved": the missing set, or every pixel when
    /// nothing is missing.
    pub fn eval_mask(&self) -> Mask {
        if self.target.mask.unobserved_count() == 0 {
            let (m, n) = self.target.shape();
            Mask::all_observed(m, n)
        } else {
            self.target.mask.complement()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainOptions {
    pub steps: usize,
    pub log_every: usize,
    /// Freeze the Laplacian pair at the start of this step.
    pub freeze_at: Option<usize>,
    /// Steps at which `(L_r, L_c)` are captured.
    pub heatmap_steps: Vec<usize>,
    /// Cadence of prediction snapshots.
    pub snapshot_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: TrajectoryLog,
    pub prediction: DenseMatrix,
    /// `(step, L_r, L_c)`.
    pub laplacians: Vec<(usize, DenseMatrix, DenseMatrix)>,
    pub snapshots: Vec<(usize, DenseMatrix)>,
    pub model: Model,
    pub reg: RegularizerState,
}

#[derive(Debug, Serialize)]
struct CheckpointMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Checkpoint {
    step: usize,
    model: Vec<CheckpointMatrix>,
    regularizer: Vec<CheckpointMatrix>,
}

fn checkpoint_bytes(step: usize, model: &Model, reg: &RegularizerState) -> Result<Vec<u8>> {
    let conv = |ms: Vec<&DenseMatrix>| {
        ms.into_iter()
            .map(|m| CheckpointMatrix {
                rows: m.rows(),
                cols: m.cols(),
                data: m.as_slice().to_vec(),
            })
            .collect()
    };
    let ck = Checkpoint {
        step,
        model: conv(model.trainable()),
        regularizer: conv(reg.trainable()),
    };
    toml::to_string(&ck)
        .map(String::into_bytes)
        .map_err(|e| Error::Config(e.to_string()))
}

fn effective_rank_or_zero(m: &DenseMatrix) -> Result<f64> {
    if m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    effective_rank(m)
}

/// Evaluation metrics of a predicted grid.
pub fn evaluate(
    step: usize,
    grid: &DenseMatrix,
    data: &TaskData,
    loss: f64,
    fidelity: f64,
    penalty: f64,
) -> Result<LogRow> {
    let observed_mse = mse(grid, &data.target.pixels, Some(&data.target.mask))?;
    let unobserved_mse = mse(grid, &data.clean, Some(&data.eval_mask()))?;
    let full = mse(grid, &data.clean, None)?;
    Ok(LogRow {
        step,
        loss,
        fidelity,
        penalty,
        observed_mse,
        unobserved_mse,
        psnr: psnr_from_mse(unobserved_mse),
        psnr_full: psnr_from_mse(full),
        effective_rank: effective_rank_or_zero(grid)?,
    })
}

fn is_numeric_failure(e: &Error) -> bool {
    matches!(e, Error::NumericRange(_) | Error::NonFiniteLoss { .. })
}

/// Trains `model` under `reg` for `opts.steps` updates. Metrics are logged at
/// step 0, every `log_every` steps and after the final update. On a
/// non-finite loss the last finite parameters are written to `checkpoint`
/// (when given) and [`Error::NonFiniteLoss`] is returned.
pub fn train(
    mut model: Model,
    mut reg: RegularizerState,
    data: &TaskData,
    opts: &TrainOptions,
    optimizer: &OptimizerSection,
    checkpoint: Option<&Path>,
) -> Result<TrainOutcome> {
    if opts.log_every == 0 {
        return Err(Error::Config("log_every must be >= 1".into()));
    }
    let mut adam = AdamState::new(optimizer.beta1, optimizer.beta2, optimizer.eps);
    for p in model.trainable() {
        adam.add_slot(p.shape(), optimizer.lr);
    }
    for p in reg.trainable() {
        adam.add_slot(p.shape(), optimizer.reg_lr);
    }
    let mut log = TrajectoryLog::new();
    let mut laplacians = Vec::new();
    let mut snapshots = Vec::new();
    let mut last_good = checkpoint_bytes(0, &model, &reg)?;
    let start = Instant::now();

    for step in 0..=opts.steps {
        if opts.freeze_at == Some(step) {
            if let Some(pair) = reg.pair_mut() {
                pair.freeze(step)?;
            }
        }
        let attempt = (|| -> Result<_> {
            let mut g = Graph::new();
            let nodes = model.record(&mut g)?;
            let obj = record_objective(&mut g, nodes.grid, &nodes.weights, &data.target, &reg)?;
            let loss = g.scalar(obj.loss);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            Ok((g, nodes, obj))
        })();
        let (g, nodes, obj) = match attempt {
            Ok(v) => v,
            Err(e) if is_numeric_failure(&e) => {
                if let Some(path) = checkpoint {
                    write_atomic(path, &last_good)?;
                }
                return Err(match e {
                    Error::NumericRange(_) => Error::NonFiniteLoss { step },
                    other => other,
                });
            }
            Err(e) => return Err(e),
        };
        let grid = g.value(nodes.grid);
        if step % opts.log_every == 0 || step == opts.steps {
            let penalty = obj.penalty.map(|p| g.scalar(p)).unwrap_or(0.0);
            let row = evaluate(step, grid, data, g.scalar(obj.loss), g.scalar(obj.fidelity), penalty)?;
            log.push(row, start.elapsed().as_secs_f64())?;
        }
        if opts.heatmap_steps.contains(&step) {
            if let Some(pair) = reg.pair() {
                laplacians.push((step, pair.rows.laplacian()?, pair.cols.laplacian()?));
            }
        }
        if let Some(every) = opts.snapshot_every {
            if step % every == 0 || step == opts.steps {
                snapshots.push((step, grid.clone()));
            }
        }
        if step == opts.steps {
            let prediction = grid.clone();
            return Ok(TrainOutcome {
                log,
                prediction,
                laplacians,
                snapshots,
                model,
                reg,
            });
        }
        let mut grads = g.backward(obj.loss)?;
        let model_grads: Vec<Option<DenseMatrix>> = nodes.params.iter().map(|id| grads.take(*id)).collect();
        let reg_grads: Vec<Option<DenseMatrix>> = obj
            .reg_params
            .iter()
            .map(|id| id.and_then(|id| grads.take(id)))
            .collect();
        drop(g);
        last_good = checkpoint_bytes(step, &model, &reg)?;
        let grad_refs: Vec<Option<&DenseMatrix>> = model_grads.iter().chain(&reg_grads).map(Option::as_ref).collect();
        let mut params: Vec<&mut DenseMatrix> = model.trainable_mut();
        params.extend(reg.trainable_mut());
        adam.update(&mut params, &grad_refs)?;
    }
    unreachable!("loop returns at the final step")
}
