//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 0            # master seed; SGD trial t uses seed + 1 + t
//! trials = 10         # SGD restarts, ≥ 1
//! beta = 1e-3
//! loss = "squared"    # squared | hinge
//! threads = 0         # worker pool size for the trials, 0 = one per core
//! out = "runs/paper"  # output directory (overridden by --out)
//!
//! [dataset]           # exactly one of builtin / csv
//! builtin = "paper-1d"  # paper-1d | clusters | anomaly
//! n = 50              # synthetic datasets only
//! csv = "data.csv"
//! label = "y"         # label column of the CSV
//! append_ones = false # append a constant feature
//!
//! [model]
//! kind = "relu"       # relu | linear-cnn | circular-cnn | separable-cnn
//! height = 8          # image geometry for linear-cnn and separable-cnn
//! width = 8
//! channels = 1
//! filter_h = 3
//! filter_w = 3
//! stride = 1
//! filter_len = 4      # circular-cnn, defaults to the signal length
//! normalization = "unitary"  # circular-cnn DFT convention: unitary | unnormalized
//!
//! [patterns]
//! source = "exact"    # exact | sample | alg1 | alg2 | alg3
//! count = 100         # sample: number of random directions
//! quantile = 0.1      # alg3: fraction of smallest |x_iᵀu| flipped per neuron
//!
//! [solver]            # convex solver, see cvxnn::SolverConfig
//! max_iter = 20000
//! gap_tol = 1e-9
//!
//! [sgd]               # nonconvex baseline
//! learning_rate = 1e-2
//! batch_size = 5      # ignored by the CNN models, which use full batches
//! epochs = 2000       # gradient steps for the CNN models
//! m = 8               # hidden neurons, or filters for the CNN models
//! init_scale = 0.5
//!
//! [gauge]
//! beta_small = 1e-4   # default: 1e-4 · ‖y‖
//! polar_samples = 2000
//! ```
//!
//! Pattern sources: `exact` enumerates every region, `sample` draws Gaussian
//! directions, `alg1` harvests the neurons of an SGD-trained network, `alg2`
//! those of the network at initialization and `alg3` adds bit-flipped
//! variants of the trained neurons' patterns. The networks behind `alg1`,
//! `alg2` and `alg3` use the `[sgd]` settings with the master seed.

use std::path::{Path, PathBuf};

use cvxnn::cnn::DftNormalization;
use cvxnn::{LossKind, SolverConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::SyntheticKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    #[serde(rename = "paper-1d")]
    Paper1d,
    Clusters,
    Anomaly,
}

impl Builtin {
    pub fn synthetic_kind(self) -> Option<SyntheticKind> {
        match self {
            Builtin::Paper1d => None,
            Builtin::Clusters => Some(SyntheticKind::Clusters),
            Builtin::Anomaly => Some(SyntheticKind::Anomaly),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub builtin: Option<Builtin>,
    pub n: Option<usize>,
    pub csv: Option<PathBuf>,
    pub label: Option<String>,
    #[serde(default)]
    pub append_ones: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Relu,
    LinearCnn,
    CircularCnn,
    SeparableCnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub filter_h: usize,
    pub filter_w: usize,
    pub stride: usize,
    pub filter_len: Option<usize>,
    pub normalization: DftNormalization,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Relu,
            height: 0,
            width: 0,
            channels: 1,
            filter_h: 0,
            filter_w: 0,
            stride: 1,
            filter_len: None,
            normalization: DftNormalization::Unitary,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PatternSource {
    #[default]
    Exact,
    Sample {
        count: usize,
    },
    Alg1,
    Alg2,
    Alg3 {
        quantile: f64,
    },
}

impl PatternSource {
    pub fn label(&self) -> String {
        match self {
            PatternSource::Exact => "exact".into(),
            PatternSource::Sample { count } => format!("sample({count})"),
            PatternSource::Alg1 => "alg1".into(),
            PatternSource::Alg2 => "alg2".into(),
            PatternSource::Alg3 { quantile } => format!("alg3({quantile})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdSpec {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub m: usize,
    pub init_scale: f64,
}

impl Default for SgdSpec {
    fn default() -> Self {
        SgdSpec {
            learning_rate: 1e-2,
            batch_size: 5,
            epochs: 2000,
            m: 8,
            init_scale: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeSpec {
    pub beta_small: Option<f64>,
    pub polar_samples: usize,
}

impl Default for GaugeSpec {
    fn default() -> Self {
        GaugeSpec {
            beta_small: None,
            polar_samples: 2000,
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_beta() -> f64 {
    1e-3
}

fn default_loss() -> LossKind {
    LossKind::Squared
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub patterns: PatternSource,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub sgd: SgdSpec,
    #[serde(default)]
    pub gauge: GaugeSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        // relative CSV paths are taken from the config's directory
        if let (Some(csv), Some(dir)) = (&cfg.dataset.csv, path.parent()) {
            if csv.is_relative() {
                cfg.dataset.csv = Some(dir.join(csv));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.trials == 0 {
            return invalid("trials must be ≥ 1".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be finite and ≥ 0, got {}", self.beta));
        }
        let ds = &self.dataset;
        match (&ds.builtin, &ds.csv) {
            (Some(_), Some(_)) => return invalid("dataset: give either `builtin` or `csv`, not both".into()),
            (None, None) => return invalid("dataset: one of `builtin` or `csv` is required".into()),
            (Some(b), None) => {
                if ds.label.is_some() {
                    return invalid("dataset: `label` only applies to CSV datasets".into());
                }
                match (b.synthetic_kind(), ds.n) {
                    (Some(_), None) => return invalid("dataset: synthetic datasets need `n`".into()),
                    (Some(_), Some(n)) if n < 4 => return invalid(format!("dataset: n must be ≥ 4, got {n}")),
                    (None, Some(_)) => return invalid("dataset: paper-1d has a fixed size, drop `n`".into()),
                    _ => {}
                }
            }
            (None, Some(_)) => {
                if ds.label.is_none() {
                    return invalid("dataset: CSV datasets need a `label` column".into());
                }
                if ds.n.is_some() {
                    return invalid("dataset: `n` only applies to synthetic datasets".into());
                }
            }
        }
        match &self.patterns {
            PatternSource::Sample { count } if *count == 0 => return invalid("patterns: count must be ≥ 1".into()),
            PatternSource::Alg3 { quantile } if !(*quantile > 0.0 && *quantile < 1.0) => {
                return invalid(format!("patterns: quantile must lie in (0, 1), got {quantile}"))
            }
            _ => {}
        }
        let m = &self.model;
        match m.kind {
            ModelKind::Relu => {}
            ModelKind::LinearCnn | ModelKind::SeparableCnn => {
                if m.height == 0 || m.width == 0 || m.channels == 0 || m.filter_h == 0 || m.filter_w == 0 {
                    return invalid("model: CNN models need height, width, channels, filter_h and filter_w".into());
                }
                if m.stride == 0 {
                    return invalid("model: stride must be ≥ 1".into());
                }
            }
            ModelKind::CircularCnn => {
                if m.filter_len == Some(0) {
                    return invalid("model: filter_len must be ≥ 1".into());
                }
            }
        }
        if matches!(m.kind, ModelKind::LinearCnn | ModelKind::CircularCnn) && self.loss != LossKind::Squared {
            return invalid("model: linear CNNs are trained with squared loss only".into());
        }
        self.solver.validate().map_err(|e| ConfigError::Invalid(format!("solver: {e}")))?;
        let s = &self.sgd;
        if !(s.learning_rate >= 0.0 && s.learning_rate.is_finite()) {
            return invalid(format!("sgd: learning_rate must be finite and ≥ 0, got {}", s.learning_rate));
        }
        if s.batch_size == 0 || s.m == 0 {
            return invalid("sgd: batch_size and m must be ≥ 1".into());
        }
        if !(s.init_scale > 0.0 && s.init_scale.is_finite()) {
            return invalid(format!("sgd: init_scale must be positive, got {}", s.init_scale));
        }
        if let Some(b) = self.gauge.beta_small {
            if !(b > 0.0 && b.is_finite()) {
                return invalid(format!("gauge: beta_small must be positive, got {b}"));
            }
        }
        if self.gauge.polar_samples == 0 {
            return invalid("gauge: polar_samples must be ≥ 1".into());
        }
        Ok(())
    }

    /// Seed of SGD trial `t`; the master seed itself drives data generation
    /// and the networks behind the harvested pattern sources.
    pub fn trial_seed(&self, t: usize) -> u64 {
        self.seed.wrapping_add(1 + t as u64)
    }
}
