//! Temporal readout: target delays per class and class decisions from actual
//! output delays.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReadoutMode {
    /// One output neuron; class `i` owns the checkpoint `T + i * tau_e`.
    SingleNeuron,
    /// One output neuron per class; the excitatory neuron targets `T + tau_e`,
    /// every other neuron `T + tau_i`.
    MultiNeuron,
}

/// How the multi-neuron readout turns output delays into a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    /// Earliest output spike wins.
    #[default]
    Earliest,
    /// Walk the class decision tree: neuron `i` answers "class `i`, or one of
    /// the later classes?". The first neuron whose delay is nearer the
    /// excitatory than the inhibitory target names the class; the last class
    /// is the fallback. Matches training with the heuristic loss, where
    /// neuron `i` only ever sees samples of classes `>= i`.
    Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetScheme {
    pub mode: ReadoutMode,
    /// Encoding window `T`; no target fires earlier than this.
    pub window: f64,
    pub tau_e: f64,
    /// Inhibitory offset, used by the multi-neuron mode only.
    #[serde(default)]
    pub tau_i: f64,
    pub num_classes: usize,
    /// Multi-neuron decision rule.
    #[serde(default)]
    pub decision: Decision,
}

impl TargetScheme {
    pub fn single_neuron(window: f64, tau_e: f64, num_classes: usize) -> Self {
        TargetScheme {
            mode: ReadoutMode::SingleNeuron,
            window,
            tau_e,
            tau_i: 0.0,
            num_classes,
            decision: Decision::Earliest,
        }
    }

    pub fn multi_neuron(window: f64, tau_e: f64, tau_i: f64, num_classes: usize) -> Self {
        TargetScheme {
            mode: ReadoutMode::MultiNeuron,
            window,
            tau_e,
            tau_i,
            num_classes,
            decision: Decision::Earliest,
        }
    }

    pub fn with_decision(mut self, decision: Decision) -> Self {
        self.decision = decision;
        self
    }

    /// Checks the scheme against the coding's unit interval `tau`.
    pub fn validate(&self, tau: f64) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::config("target scheme needs at least one class"));
        }
        if !(self.window.is_finite() && self.window > 0.0) {
            return Err(Error::config(format!(
                "target window must be positive, got {}",
                self.window
            )));
        }
        match self.mode {
            ReadoutMode::SingleNeuron => {
                if self.num_classes > 1 && !(self.tau_e >= tau) {
                    return Err(Error::config(format!(
                        "checkpoint spacing tau_e = {} must be at least tau = {tau}",
                        self.tau_e
                    )));
                }
            }
            ReadoutMode::MultiNeuron => {
                if !(self.tau_e >= 0.0 && self.tau_e < self.tau_i) {
                    return Err(Error::config(format!(
                        "need 0 <= tau_e < tau_i, got tau_e = {} and tau_i = {}",
                        self.tau_e, self.tau_i
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of output neurons the scheme reads.
    pub fn output_size(&self) -> usize {
        match self.mode {
            ReadoutMode::SingleNeuron => 1,
            ReadoutMode::MultiNeuron => self.num_classes,
        }
    }

    /// Single-neuron checkpoint of class `class_index`.
    pub fn checkpoint(&self, class_index: usize) -> f64 {
        self.window + class_index as f64 * self.tau_e
    }

    pub fn excitatory_target(&self) -> f64 {
        self.window + self.tau_e
    }

    pub fn inhibitory_target(&self) -> f64 {
        self.window + self.tau_i
    }

    pub fn target_vector(&self, class_index: usize) -> Result<Vec<f64>> {
        self.check_class(class_index)?;
        Ok(match self.mode {
            ReadoutMode::SingleNeuron => vec![self.checkpoint(class_index)],
            ReadoutMode::MultiNeuron => {
                let mut t = vec![self.inhibitory_target(); self.num_classes];
                t[class_index] = self.excitatory_target();
                t
            }
        })
    }

    /// Nearest checkpoint (single), or earliest spike or decision-tree walk
    /// (multi). Ties go to the lowest class index.
    pub fn read_class(&self, actual: &[f64]) -> Result<usize> {
        if actual.len() != self.output_size() {
            return Err(Error::shape(format!(
                "readout expects {} output delays, got {}",
                self.output_size(),
                actual.len()
            )));
        }
        if let Some(bad) = actual.iter().find(|d| !d.is_finite()) {
            return Err(Error::Evaluation(format!("non-finite output delay {bad}")));
        }
        Ok(match self.mode {
            ReadoutMode::SingleNeuron => {
                let d = actual[0];
                argmin((0..self.num_classes).map(|c| (d - self.checkpoint(c)).abs()))
            }
            ReadoutMode::MultiNeuron => match self.decision {
                Decision::Earliest => argmin(actual.iter().copied()),
                Decision::Tree => {
                    let (ex, inh) = (self.excitatory_target(), self.inhibitory_target());
                    actual
                        .iter()
                        .position(|&d| (d - ex).abs() <= (d - inh).abs())
                        .unwrap_or(self.num_classes - 1)
                }
            },
        })
    }

    /// True when some output spike precedes the encoding window, i.e. fires
    /// before any legal target.
    pub fn fires_before_window(&self, actual: &[f64]) -> bool {
        actual.iter().any(|&d| d < self.window)
    }

    fn check_class(&self, class_index: usize) -> Result<()> {
        if class_index >= self.num_classes {
            return Err(Error::shape(format!(
                "class {class_index} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}
