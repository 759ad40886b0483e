//! Accuracy, confusion matrices, spike counts and the energy model.
//!
//! Energy is reported in units of `alpha`, the cost of one spike. Every hidden
//! and output neuron fires exactly once per inference; input neurons fire
//! once unless their coding marks them silent.

use std::path::Path;

use serde::Serialize;

use crate::datasets::EncodedSample;
use crate::error::{Error, Result};
use crate::learning::{map_chunks, EpochRecord};
use crate::network::Network;
use crate::readout::TargetScheme;

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.num_classes()).map(|c| self.counts[c][c]).sum()
    }

    fn merge(&mut self, other: &ConfusionMatrix) {
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(other_row) {
                *a += b;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Samples with at least one output spike earlier than the encoding
    /// window, i.e. before any legal target.
    pub pre_window: usize,
}

/// Forward pass and readout over `samples`.
pub fn evaluate(net: &Network, samples: &[EncodedSample], scheme: &TargetScheme) -> Result<Evaluation> {
    if scheme.output_size() != net.output_size() {
        return Err(Error::shape(format!(
            "readout expects {} output neurons, network has {}",
            scheme.output_size(),
            net.output_size()
        )));
    }
    let classes = scheme.num_classes;
    let parts = map_chunks(samples, |chunk| {
        let mut confusion = ConfusionMatrix::new(classes);
        let mut pre_window = 0;
        for sample in chunk {
            if sample.label >= classes {
                return Err(Error::shape(format!(
                    "label {} out of range for {classes} classes",
                    sample.label
                )));
            }
            let trace = net.forward_delays(&sample.input)?;
            let predicted = scheme.read_class(trace.output())?;
            confusion.counts[sample.label][predicted] += 1;
            if scheme.fires_before_window(trace.output()) {
                pre_window += 1;
            }
        }
        Ok((confusion, pre_window))
    })?;
    let mut confusion = ConfusionMatrix::new(classes);
    let mut pre_window = 0;
    for (c, p) in &parts {
        confusion.merge(c);
        pre_window += p;
    }
    let accuracy = if samples.is_empty() {
        0.0
    } else {
        confusion.correct() as f64 / samples.len() as f64
    };
    Ok(Evaluation {
        accuracy,
        confusion,
        pre_window,
    })
}

/// Spikes emitted during one inference, split by layer role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SpikeCount {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl SpikeCount {
    pub fn total(&self) -> usize {
        self.input + self.hidden + self.output
    }
}

impl std::ops::Add for SpikeCount {
    type Output = SpikeCount;

    fn add(self, o: SpikeCount) -> SpikeCount {
        SpikeCount {
            input: self.input + o.input,
            hidden: self.hidden + o.hidden,
            output: self.output + o.output,
        }
    }
}

/// Spikes for one sample: fired inputs plus one spike per hidden and output
/// neuron. A neuron clipped to delay 0 still fires.
pub fn spike_count(sample: &EncodedSample, net: &Network) -> Result<SpikeCount> {
    if sample.input.len() != net.input_size() {
        return Err(Error::shape(format!(
            "sample has {} input delays, network expects {}",
            sample.input.len(),
            net.input_size()
        )));
    }
    let sizes = net.layer_sizes();
    Ok(SpikeCount {
        input: sample.input.spike_count(),
        hidden: sizes[1..sizes.len() - 1].iter().sum(),
        output: net.output_size(),
    })
}

/// Summed spike counts over `samples`.
pub fn total_spikes(samples: &[EncodedSample], net: &Network) -> Result<SpikeCount> {
    samples
        .iter()
        .try_fold(SpikeCount::default(), |acc, s| Ok(acc + spike_count(s, net)?))
}

/// Energy of `spikes` spikes at `alpha` units each.
pub fn energy(spikes: usize, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(format!("alpha must be positive, got {alpha}")));
    }
    Ok(spikes as f64 * alpha)
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub mse: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    /// Mean spikes per test inference (per training inference without a
    /// test set).
    pub spikes: f64,
    pub energy: f64,
}

impl MetricsRow {
    pub fn from_record(record: &EpochRecord, spikes_per_inference: f64, alpha: f64) -> Self {
        MetricsRow {
            epoch: record.epoch,
            mse: record.mse,
            train_acc: record.train_accuracy,
            test_acc: record.test_accuracy,
            spikes: spikes_per_inference,
            energy: spikes_per_inference * alpha,
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `epoch,mse,train_acc,test_acc,spikes,energy`, one row per epoch.
/// A missing test accuracy is an empty field.
pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    if rows.is_empty() {
        w.write_record(["epoch", "mse", "train_acc", "test_acc", "spikes", "energy"])
            .map_err(|e| csv_err(path, e))?;
    }
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the confusion matrix as a grid: a header of predicted class names,
/// then one row per actual class led by its name.
pub fn write_confusion_csv(path: impl AsRef<Path>, m: &ConfusionMatrix, class_names: &[String]) -> Result<()> {
    let path = path.as_ref();
    if class_names.len() != m.num_classes() {
        return Err(Error::shape(format!(
            "{} class names for a {}-class confusion matrix",
            class_names.len(),
            m.num_classes()
        )));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["actual\\predicted".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (name, row) in class_names.iter().zip(&m.counts) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(usize::to_string));
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
