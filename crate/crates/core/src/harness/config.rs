//! Declarative experiment configuration (TOML).
//!
//! ```toml
//! [experiment]
//! task = "inpaint"          # inpaint | denoise | fit | ntk_sweep | implicit_bias
//! seed = 0
//! steps = 3000
//! log_every = 100
//! out_dir = "out/inpaint"
//! freeze_at = 1500          # optional; holds the Laplacians fixed from this step
//! heatmap_steps = [0, 1500, 3000]
//!
//! [image]
//! source = "file"           # file | synthetic_ring
//! path = "../data/cameraman_64.pgm"
//! downsample = 1
//!
//! [mask]
//! kind = "patch"
//! rects = [{ row = 24, col = 24, height = 16, width = 16 }]
//!
//! [model]
//! family = "siren"          # siren | relu | inrz | dmf
//! hidden = [64, 64, 64]
//! omega0 = 30.0
//!
//! [regularizer]
//! kind = "inrr"             # none | tv | l2 | air | inrr
//! lambda_r = 1.0
//! lambda_c = 1.0
//!
//! [optimizer]
//! lr = 1e-4
//! ```
//!
//! Relative input paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Activation, Neighborhood, NetworkSpec};
use crate::regularizers::WeightNorm;
use crate::tasks::{MaskKind, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Inpaint,
    Denoise,
    Fit,
    NtkSweep,
    ImplicitBias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub freeze_at: Option<usize>,
    #[serde(default)]
    pub heatmap_steps: Vec<usize>,
}

fn default_steps() -> usize {
    2000
}

fn default_log_every() -> usize {
    100
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageSource {
    File {
        path: PathBuf,
        #[serde(default = "one")]
        downsample: usize,
    },
    SyntheticRing {
        rows: usize,
        cols: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Siren,
    Relu,
    Inrz,
    Dmf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: ModelFamily,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    /// Fourier feature count `D`; enables the feature map with `delta`.
    #[serde(default)]
    pub features: Option<usize>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// INR-Z neighborhood side.
    #[serde(default = "default_patch")]
    pub patch: usize,
    /// DMF factor count.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_dmf_std")]
    pub init_std: f64,
}

fn default_hidden() -> Vec<usize> {
    vec![64; 5]
}

fn default_omega0() -> f64 {
    30.0
}

fn default_patch() -> usize {
    3
}

fn default_depth() -> usize {
    3
}

fn default_dmf_std() -> f64 {
    1e-2
}

impl ModelSection {
    pub fn siren(hidden: Vec<usize>, omega0: f64) -> Self {
        Self {
            family: ModelFamily::Siren,
            hidden,
            omega0,
            features: None,
            delta: None,
            patch: default_patch(),
            depth: default_depth(),
            init_std: default_dmf_std(),
        }
    }

    /// Network spec for the coordinate families; `None` for DMF.
    pub fn network_spec(&self) -> Result<Option<NetworkSpec>> {
        let (input_dim, activation) = match self.family {
            ModelFamily::Siren => (2, Activation::Sine),
            ModelFamily::Relu => (2, Activation::Relu),
            ModelFamily::Inrz => (Neighborhood { patch: self.patch }.input_dim(), Activation::Sine),
            ModelFamily::Dmf => return Ok(None),
        };
        let mut spec = match activation {
            Activation::Sine => NetworkSpec::siren(input_dim, 1, self.hidden.clone(), self.omega0),
            _ => NetworkSpec::relu(input_dim, 1, self.hidden.clone()),
        };
        match (self.features, self.delta) {
            (Some(d), Some(delta)) => spec = spec.with_feature_map(d, delta),
            (None, None) => {}
            _ => {
                return Err(Error::Config(
                    "model.features and model.delta must be set together".into(),
                ))
            }
        }
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(Some(spec))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    None,
    Tv,
    L2,
    Air,
    Inrr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerSection {
    pub kind: RegularizerKind,
    /// Weight for TV and L2.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lambda")]
    pub lambda_r: f64,
    #[serde(default = "default_lambda")]
    pub lambda_c: f64,
    #[serde(default)]
    pub norm: WeightNorm,
    /// Embedding dimension `r`; defaults to `max(m, n)`.
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default = "default_tiny_hidden")]
    pub tiny_hidden: Vec<usize>,
    #[serde(default = "default_omega0")]
    pub tiny_omega0: f64,
    /// Init std of the free AIR embedding.
    #[serde(default = "default_air_std")]
    pub air_init_std: f64,
}

fn default_lambda() -> f64 {
    1e-2
}

fn default_tiny_hidden() -> Vec<usize> {
    vec![32; 5]
}

fn default_air_std() -> f64 {
    0.1
}

impl RegularizerSection {
    pub fn of(kind: RegularizerKind) -> Self {
        Self {
            kind,
            lambda: default_lambda(),
            lambda_r: default_lambda(),
            lambda_c: default_lambda(),
            norm: WeightNorm::default(),
            rank: None,
            tiny_hidden: default_tiny_hidden(),
            tiny_omega0: default_omega0(),
            air_init_std: default_air_std(),
        }
    }
}

impl Default for RegularizerSection {
    fn default() -> Self {
        Self::of(RegularizerKind::None)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Learning rate of the adjacency parameters.
    #[serde(default = "default_lr")]
    pub reg_lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_lr() -> f64 {
    1e-4
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            reg_lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Kernel regression with the Fourier-feature composed NTK.
    Delta,
    /// SIREN training with the given first-layer frequency.
    Omega0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub missing_rates: Vec<f64>,
    /// Feature count for the composed kernel; the `D → ∞` limit when absent.
    #[serde(default)]
    pub features: Option<usize>,
    /// Hidden widths of the ReLU network whose NTK defines `h`.
    #[serde(default = "default_h_hidden")]
    pub h_hidden: Vec<usize>,
    #[serde(default = "default_h_knots")]
    pub h_knots: usize,
    #[serde(default = "default_h_samples")]
    pub h_samples: usize,
}

fn default_h_hidden() -> Vec<usize> {
    vec![256]
}

fn default_h_knots() -> usize {
    41
}

fn default_h_samples() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasFamily {
    Dmf1,
    Dmf3,
    Relu,
    Siren,
}

impl BiasFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dmf1 => "dmf1",
            Self::Dmf3 => "dmf3",
            Self::Relu => "relu",
            Self::Siren => "siren",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSection {
    pub families: Vec<BiasFamily>,
    /// Snapshot cadence in steps; defaults to the log cadence.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    /// Learning rate for the DMF families.
    #[serde(default = "default_dmf_lr")]
    pub dmf_lr: f64,
}

fn default_dmf_lr() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub image: ImageSource,
    #[serde(default)]
    pub mask: Option<MaskKind>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub model: ModelSection,
    #[serde(default)]
    pub regularizer: RegularizerSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub bias: Option<BiasSection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a config file, resolves relative input paths against its
    /// directory and validates it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let ImageSource::File { path, .. } = &mut self.image {
            fix(path);
        }
        if let Some(mask) = &mut self.mask {
            resolve_mask(mask, base);
        }
    }

    /// Files the run reads, for hashing into the manifest.
    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        if let ImageSource::File { path, .. } = &self.image {
            out.push(path.clone());
        }
        if let Some(mask) = &self.mask {
            mask_files(mask, &mut out);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        let e = &self.experiment;
        if e.steps < 1 {
            return cfg_err("experiment.steps must be >= 1".into());
        }
        if e.log_every < 1 {
            return cfg_err("experiment.log_every must be >= 1".into());
        }
        if let Some(t) = e.freeze_at {
            if !matches!(self.regularizer.kind, RegularizerKind::Air | RegularizerKind::Inrr) {
                return cfg_err("experiment.freeze_at needs an air or inrr regularizer".into());
            }
            if t > e.steps {
                return cfg_err(format!("experiment.freeze_at {t} exceeds steps {}", e.steps));
            }
        }
        match &self.image {
            ImageSource::File { path, downsample } => {
                if !path.is_file() {
                    return cfg_err(format!("image file {} does not exist", path.display()));
                }
                if *downsample < 1 {
                    return cfg_err("image.downsample must be >= 1".into());
                }
            }
            ImageSource::SyntheticRing { rows, cols } => {
                if *rows < 2 || *cols < 2 {
                    return cfg_err("synthetic image needs rows, cols >= 2".into());
                }
            }
        }
        for f in self.input_files() {
            if !f.is_file() {
                return cfg_err(format!("input file {} does not exist", f.display()));
            }
        }
        if let Some(noise) = &self.noise {
            noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.experiment.task == Task::Denoise && self.noise.is_none() {
            return cfg_err("denoise task needs a [noise] section".into());
        }
        if self.experiment.task == Task::Fit && self.mask.is_some() {
            return cfg_err("fit task observes every pixel; remove [mask]".into());
        }
        self.model.network_spec()?;
        if self.model.family == ModelFamily::Dmf && (self.model.depth < 1 || !(self.model.init_std > 0.0)) {
            return cfg_err("dmf needs depth >= 1 and init_std > 0".into());
        }
        let r = &self.regularizer;
        for (name, v) in [("lambda", r.lambda), ("lambda_r", r.lambda_r), ("lambda_c", r.lambda_c)] {
            if !(v.is_finite() && v >= 0.0) {
                return cfg_err(format!("regularizer.{name} must be finite and >= 0"));
            }
        }
        if r.rank == Some(0) || r.tiny_hidden.contains(&0) || !(r.tiny_omega0 > 0.0) || !(r.air_init_std > 0.0) {
            return cfg_err("regularizer rank, tiny_hidden, tiny_omega0 and air_init_std must be positive".into());
        }
        if r.kind == RegularizerKind::L2 && self.model.family == ModelFamily::Dmf {
            return cfg_err("l2 weight penalty applies to networks, not dmf".into());
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.reg_lr > 0.0 && o.eps > 0.0)
            || !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
        {
            return cfg_err("optimizer needs lr, reg_lr, eps > 0 and betas in [0, 1)".into());
        }
        match self.experiment.task {
            Task::NtkSweep => {
                let Some(s) = &self.sweep else {
                    return cfg_err("ntk_sweep task needs a [sweep] section".into());
                };
                if s.values.is_empty() || s.missing_rates.is_empty() {
                    return cfg_err("sweep.values and sweep.missing_rates must be nonempty".into());
                }
                if s.missing_rates.iter().any(|p| !(0.0..1.0).contains(p)) {
                    return cfg_err("sweep.missing_rates must lie in [0, 1)".into());
                }
                if s.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return cfg_err("sweep.values must be positive".into());
                }
                if s.h_knots < 2 || s.h_samples < 1 || s.h_hidden.is_empty() {
                    return cfg_err("sweep needs h_knots >= 2, h_samples >= 1 and a hidden layer".into());
                }
            }
            Task::ImplicitBias => {
                let Some(b) = &self.bias else {
                    return cfg_err("implicit_bias task needs a [bias] section".into());
                };
                if b.families.is_empty() {
                    return cfg_err("bias.families must be nonempty".into());
                }
                if b.snapshot_every == Some(0) || !(b.dmf_lr > 0.0) {
                    return cfg_err("bias.snapshot_every and bias.dmf_lr must be positive".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn resolve_mask(mask: &mut MaskKind, base: &Path) {
    match mask {
        MaskKind::File { path } if path.is_relative() => *path = base.join(&*path),
        MaskKind::Mixture { components } => components.iter_mut().for_each(|c| resolve_mask(c, base)),
        _ => {}
    }
}

fn mask_files(mask: &MaskKind, out: &mut Vec<PathBuf>) {
    match mask {
        MaskKind::File { path } => out.push(path.clone()),
        MaskKind::Mixture { components } => components.iter().for_each(|c| mask_files(c, out)),
        _ => {}
    }
}
