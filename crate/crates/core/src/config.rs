//! Run configuration (TOML) and the shipped presets.
//!
//! ```toml
//! name = "mt1-iris"
//! layers = [4, 25, 1]            # input, hidden..., output
//!
//! [dataset]                      # kind = "iris" | "mnist"
//! kind = "iris"
//! path = "data/iris.csv"
//! train_count = 120
//! test_count = 30
//! split_seed = 0
//!
//! [coding]                       # scheme = "numeric" | "one-to-one" | "conv-like"
//! scheme = "numeric"
//! window = 16.0
//! tau = 1.0                      # conv-like also takes kernel, stride, threshold
//!
//! [readout]                      # mode = "single-neuron" | "multi-neuron"
//! mode = "single-neuron"
//! window = 16.0
//! tau_e = 3.0                    # multi-neuron also takes tau_i and decision
//! num_classes = 3
//!
//! [train]
//! eta = 0.01
//! batch_size = 30
//! epochs = 2000
//! seed = 0
//! gradient_mode = "simplified"        # or "exact"
//! heuristic = false
//! update_gate = "always"         # or "on-misclassification"
//!
//! [output]
//! dir = "runs/mt1-iris"
//! alpha = 1.0
//! ```
//!
//! MNIST datasets name four IDX files (`train_images`, `train_labels`,
//! `test_images`, `test_labels`) and optionally subsample them with
//! `train_count` / `test_count`. Relative paths resolve against the working
//! directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coding::{neuron_count, CodingParams};
use crate::datasets::{self, CodingScheme, RawDataset};
use crate::error::{Error, Result};
use crate::learning::TrainConfig;
use crate::network::Activation;
use crate::readout::TargetScheme;

const MNIST_SIDE: usize = 28;
const IRIS_ATTRIBUTES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    Iris {
        path: PathBuf,
        train_count: usize,
        test_count: usize,
        #[serde(default)]
        split_seed: u64,
    },
    Mnist {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Subsample of the training file; all records when absent.
        #[serde(default)]
        train_count: Option<usize>,
        #[serde(default)]
        test_count: Option<usize>,
        #[serde(default)]
        split_seed: u64,
    },
}

impl DatasetSpec {
    pub fn split_seed(&self) -> u64 {
        match self {
            DatasetSpec::Iris { split_seed, .. } | DatasetSpec::Mnist { split_seed, .. } => *split_seed,
        }
    }

    /// Loads and splits the data into `(train, test)`.
    pub fn load(&self) -> Result<(RawDataset, RawDataset)> {
        match self {
            DatasetSpec::Iris {
                path,
                train_count,
                test_count,
                split_seed,
            } => datasets::split(&datasets::load_iris(path)?, *train_count, *test_count, *split_seed),
            DatasetSpec::Mnist {
                train_images,
                train_labels,
                test_images,
                test_labels,
                train_count,
                test_count,
                split_seed,
            } => {
                let train = datasets::load_mnist_idx(train_images, train_labels)?;
                let test = datasets::load_mnist_idx(test_images, test_labels)?;
                Ok((
                    subsample(train, *train_count, *split_seed)?,
                    subsample(test, *test_count, split_seed.wrapping_add(1))?,
                ))
            }
        }
    }
}

fn subsample(data: RawDataset, count: Option<usize>, seed: u64) -> Result<RawDataset> {
    match count {
        Some(n) if n < data.len() => Ok(datasets::split(&data, n, 0, seed)?.0),
        Some(n) if n > data.len() => Err(Error::config(format!(
            "requested {n} records but the file holds {}",
            data.len()
        ))),
        _ => Ok(data),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingSection {
    pub scheme: CodingScheme,
    #[serde(flatten)]
    pub params: CodingParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Energy per spike.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub layers: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub dataset: DatasetSpec,
    pub coding: CodingSection,
    pub readout: TargetScheme,
    pub train: TrainConfig,
    pub output: OutputSection,
}

/// Name and TOML text of every shipped preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("mt1-iris", include_str!("../presets/mt1-iris.toml")),
    ("slmt3-iris", include_str!("../presets/slmt3-iris.toml")),
    ("mt1-mnist", include_str!("../presets/mt1-mnist.toml")),
    ("mt10-heu", include_str!("../presets/mt10-heu.toml")),
    ("mt10-noheu", include_str!("../presets/mt10-noheu.toml")),
    ("slmt10-heu", include_str!("../presets/slmt10-heu.toml")),
    ("slmt10-noheu", include_str!("../presets/slmt10-noheu.toml")),
];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
        })?;
        Self::from_toml(text)
    }

    /// A preset name or a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if PRESETS.iter().any(|(n, _)| *n == name_or_path) && !Path::new(name_or_path).exists() {
            Self::preset(name_or_path)
        } else {
            Self::load(name_or_path)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Input neurons the coding will produce for this dataset kind.
    pub fn coded_input_size(&self) -> Result<usize> {
        let p = &self.coding.params;
        match (&self.dataset, self.coding.scheme) {
            (DatasetSpec::Iris { .. }, CodingScheme::Numeric) => Ok(IRIS_ATTRIBUTES),
            (DatasetSpec::Mnist { .. }, CodingScheme::OneToOne) => Ok(MNIST_SIDE * MNIST_SIDE),
            (DatasetSpec::Mnist { .. }, CodingScheme::ConvLike) => {
                p.validate_conv()?;
                if p.kernel > MNIST_SIDE {
                    return Err(Error::config(format!("kernel {} exceeds the image width", p.kernel)));
                }
                Ok(neuron_count(MNIST_SIDE, p.kernel, p.stride))
            }
            (_, scheme) => Err(Error::config(format!(
                "coding scheme {scheme:?} does not apply to this dataset kind"
            ))),
        }
    }

    /// Consistency checks that need no data: coding grid, readout, training
    /// parameters, and layer sizes against the coding and readout.
    pub fn validate(&self) -> Result<()> {
        let p = &self.coding.params;
        p.resolution()?;
        self.readout.validate(p.tau)?;
        self.train.validate(&self.readout)?;
        if self.readout.window != p.window {
            return Err(Error::config(format!(
                "readout window {} differs from coding window {}",
                self.readout.window, p.window
            )));
        }
        if self.layers.len() < 2 || self.layers.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {:?}", self.layers)));
        }
        let input = self.coded_input_size()?;
        if self.layers[0] != input {
            return Err(Error::config(format!(
                "first layer has {} neurons but the coding produces {input}",
                self.layers[0]
            )));
        }
        let output = self.readout.output_size();
        if *self.layers.last().expect("checked non-empty") != output {
            return Err(Error::config(format!(
                "last layer has {} neurons but the readout needs {output}",
                self.layers.last().expect("checked non-empty")
            )));
        }
        let classes = match self.dataset {
            DatasetSpec::Iris { .. } => 3,
            DatasetSpec::Mnist { .. } => 10,
        };
        if self.readout.num_classes != classes {
            return Err(Error::config(format!(
                "readout has {} classes, the dataset has {classes}",
                self.readout.num_classes
            )));
        }
        if !(self.output.alpha.is_finite() && self.output.alpha > 0.0) {
            return Err(Error::config(format!(
                "alpha must be positive, got {}",
                self.output.alpha
            )));
        }
        Ok(())
    }

    /// Synaptic weights of the configured network.
    pub fn weight_count(&self) -> usize {
        self.layers.windows(2).map(|p| p[0] * p[1]).sum()
    }
}
