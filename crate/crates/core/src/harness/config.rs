use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::SyntheticSpec;
use crate::ensemble::Hyperparams;
use crate::error::{Error, Result};
use crate::schedule::{ScheduleKind, DEFAULT_GAUSSIAN_HEIGHT, DEFAULT_GAUSSIAN_WIDTH};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ensemble,
    Tanh,
    Vanilla,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ensemble" => Ok(ModelKind::Ensemble),
            "tanh" => Ok(ModelKind::Tanh),
            "vanilla" => Ok(ModelKind::Vanilla),
            _ => Err(Error::Config(format!(
                "unknown model {s:?}; expected ensemble, tanh or vanilla"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ensemble => "ensemble",
            ModelKind::Tanh => "tanh",
            ModelKind::Vanilla => "vanilla",
        }
    }

    pub fn default_init_scale(self) -> f64 {
        match self {
            ModelKind::Ensemble => Hyperparams::ENSEMBLE_INIT_SCALE,
            ModelKind::Tanh | ModelKind::Vanilla => Hyperparams::BASELINE_INIT_SCALE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default = "default_n")]
    pub ensemble_size: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_true")]
    pub decay_biases: bool,
    /// Weight-init variance scale; 1.0 for the ensemble and 10.0 for baselines when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
}

fn default_n() -> usize {
    Hyperparams::DEFAULT_N
}
fn default_k() -> usize {
    Hyperparams::DEFAULT_K
}
fn default_tau() -> f64 {
    Hyperparams::DEFAULT_TAU
}
fn default_lr() -> f64 {
    Hyperparams::DEFAULT_LR
}
fn default_decay() -> f64 {
    Hyperparams::DEFAULT_DECAY
}
fn default_true() -> bool {
    true
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::new(ModelKind::Ensemble)
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            ensemble_size: default_n(),
            k: default_k(),
            tau: default_tau(),
            lr: default_lr(),
            decay: default_decay(),
            decay_biases: true,
            init_scale: None,
        }
    }

    /// Hyperparameters for a run on data of shape `(d, m)`. Baselines are single classifiers.
    pub fn hyperparams(&self, d: usize, m: usize, seed: u64) -> Hyperparams {
        let (n, k) = match self.kind {
            ModelKind::Ensemble => (self.ensemble_size, self.k),
            ModelKind::Tanh | ModelKind::Vanilla => (1, 1),
        };
        Hyperparams {
            n,
            d,
            m,
            k,
            tau: self.tau,
            lr: self.lr,
            decay: self.decay,
            decay_biases: self.decay_biases,
            init_scale: self.init_scale.unwrap_or(self.kind.default_init_scale()),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    /// `split`, `incremental`, `gaussian` or `iid`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tasks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_batches() -> usize {
    1000
}
fn default_batch_size() -> usize {
    60
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self::from_kind(&ScheduleKind::Split { tasks: 5 })
    }
}

impl ScheduleConfig {
    pub fn from_kind(kind: &ScheduleKind) -> Self {
        let mut cfg = Self {
            kind: String::new(),
            tasks: None,
            height: None,
            width: None,
            spacing: None,
            batches: default_batches(),
            batch_size: default_batch_size(),
        };
        cfg.set_kind(kind);
        cfg
    }

    pub fn set_kind(&mut self, kind: &ScheduleKind) {
        self.tasks = None;
        self.height = None;
        self.width = None;
        self.spacing = None;
        match kind {
            ScheduleKind::Split { tasks } => {
                self.kind = "split".into();
                self.tasks = Some(*tasks);
            }
            ScheduleKind::Incremental => self.kind = "incremental".into(),
            ScheduleKind::Gaussian {
                height,
                width,
                spacing,
            } => {
                self.kind = "gaussian".into();
                self.height = Some(*height);
                self.width = Some(*width);
                self.spacing = *spacing;
            }
            ScheduleKind::Iid => self.kind = "iid".into(),
        }
    }

    pub fn schedule_kind(&self) -> Result<ScheduleKind> {
        let stray = |field: &str| {
            Err(Error::Config(format!(
                "schedule field `{field}` does not apply to kind {:?}",
                self.kind
            )))
        };
        let gaussian_fields = self.height.is_some() || self.width.is_some() || self.spacing.is_some();
        match self.kind.as_str() {
            "split" => {
                if gaussian_fields {
                    return stray("height/width/spacing");
                }
                let tasks = self
                    .tasks
                    .ok_or_else(|| Error::Config("split schedule needs `tasks`".into()))?;
                Ok(ScheduleKind::Split { tasks })
            }
            "incremental" | "iid" => {
                if self.tasks.is_some() {
                    return stray("tasks");
                }
                if gaussian_fields {
                    return stray("height/width/spacing");
                }
                Ok(if self.kind == "iid" {
                    ScheduleKind::Iid
                } else {
                    ScheduleKind::Incremental
                })
            }
            "gaussian" => {
                if self.tasks.is_some() {
                    return stray("tasks");
                }
                Ok(ScheduleKind::Gaussian {
                    height: self.height.unwrap_or(DEFAULT_GAUSSIAN_HEIGHT),
                    width: self.width.unwrap_or(DEFAULT_GAUSSIAN_WIDTH),
                    spacing: self.spacing,
                })
            }
            other => Err(Error::Config(format!(
                "unknown schedule kind {other:?}; expected split, incremental, gaussian or iid"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

/// Examples per class in the default synthetic data: enough for 1000 batches of 60 in one pass.
pub const DEFAULT_SYNTHETIC_TRAIN_PER_CLASS: usize = 6000;

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            synthetic: Some(SyntheticSpec {
                train_per_class: DEFAULT_SYNTHETIC_TRAIN_PER_CLASS,
                ..SyntheticSpec::default()
            }),
        }
    }
}

/// Everything needed to reproduce an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Run `i` uses seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Permit runs that consume more examples than the training split holds.
    #[serde(default)]
    pub allow_multi_epoch: bool,
    /// Test examples whose raw outputs are dumped at every evaluation.
    #[serde(default)]
    pub probe_count: usize,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
}

fn default_runs() -> usize {
    20
}
fn default_eval_every() -> usize {
    10
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            runs: default_runs(),
            eval_every: default_eval_every(),
            out: None,
            allow_multi_epoch: false,
            probe_count: 0,
            data: DataConfig::default(),
            model: ModelConfig::default(),
            schedule: ScheduleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        match (&self.data.path, &self.data.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "data: give either `path` or `synthetic`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("data: one of `path` or `synthetic` is required".into()))
            }
            (None, Some(spec)) => spec.validate()?,
            (Some(_), None) => {}
        }
        self.schedule.schedule_kind()?;
        // Shape-independent checks on the model settings.
        self.model.hyperparams(1, 1, 0).validate()?;
        Ok(())
    }

    /// Stable identifier of everything that determines a single run except its seed.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.seed = 0;
        canonical.runs = 1;
        canonical.out = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn run_seed(&self, run_index: usize) -> u64 {
        self.seed.wrapping_add(run_index as u64)
    }
}
