//! Config-driven experiments: inpainting/denoising/fitting runs, NTK and
//! frequency sweeps, and implicit-bias studies.

pub mod config;
pub mod heatmap;
pub mod log;
pub mod manifest;
pub mod model;
pub mod run;
pub mod train;

pub use config::{ExperimentConfig, Task};
pub use heatmap::{export_heatmap, ColorScale};
pub use log::{LogRow, TrajectoryLog};
pub use manifest::{git_blob_hash, Manifest};
pub use model::{build_regularizer, Model};
pub use run::{
    implicit_bias_study, kernel_regression_inpaint, ntk_sweep, prepare_data, run_experiment, train_config, BiasRun,
    RunReport, SweepCell, SweepReport,
};
pub use train::{train, TaskData, TrainOptions, TrainOutcome};
