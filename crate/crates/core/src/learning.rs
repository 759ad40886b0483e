//! Temporal error backpropagation, the heuristic (decision-tree) loss, and the
//! mini-batch training loop.
//!
//! For an output neuron the error is `E = 1/2 (d_t - d_a)^2`, so the output
//! delta is `d_a - d_t`. A weight `w_ij` feeding layer `l` receives the
//! gradient `delta_j * d_i / n_l`, with `n_l` the fan-in of that layer.
//!
//! Hidden deltas come in two flavours:
//!
//! - [`GradientMode::Simplified`]: `delta_j = sum_k delta_k * w_jk`, with the
//!   activation slope taken as 1 everywhere and no fan-in factor;
//! - [`GradientMode::Exact`]: the strict chain rule through the averaging
//!   neuron, `delta_j = phi'(net_j) / n * sum_k delta_k * w_jk`, which is what
//!   finite differences of the squared error measure.
//!
//! With the heuristic loss enabled, a sample of class `c` only involves output
//! neurons `0..=c` (the depth-first path of the class decision tree): the other
//! output deltas are zero, so their incoming weights are left untouched and
//! the last hidden layer sums over the involved neurons only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::EncodedSample;
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{ForwardTrace, Network};
use crate::readout::{ReadoutMode, TargetScheme};

/// Samples per gradient-accumulation chunk. Chunks are summed in order, so the
/// result does not depend on how many threads run them.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    #[default]
    Simplified,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateGate {
    /// Every sample contributes its gradient.
    #[default]
    Always,
    /// Only misclassified samples contribute.
    OnMisclassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default)]
    pub gradient_mode: GradientMode,
    #[serde(default)]
    pub heuristic: bool,
    #[serde(default)]
    pub update_gate: UpdateGate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.01,
            batch_size: 30,
            epochs: 100,
            seed: 0,
            gradient_mode: GradientMode::Simplified,
            heuristic: false,
            update_gate: UpdateGate::Always,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, scheme: &TargetScheme) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config(format!(
                "learning rate must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.heuristic && scheme.mode != ReadoutMode::MultiNeuron {
            return Err(Error::config("the heuristic loss needs the multi-neuron readout"));
        }
        Ok(())
    }
}

/// Output neurons taking part in learning a sample of one class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvolvedSet {
    /// Neurons `0..=class_index`, in order.
    pub members: Vec<usize>,
    /// The one member trained towards the excitatory target.
    pub excitatory: usize,
}

impl InvolvedSet {
    pub fn contains(&self, neuron: usize) -> bool {
        neuron <= self.excitatory
    }

    /// Members other than the excitatory neuron.
    pub fn inhibitory(&self) -> &[usize] {
        &self.members[..self.members.len() - 1]
    }
}

/// Walks the class decision tree depth-first down to depth `class_index + 1`.
///
/// Every internal node on the longest path branches towards "not this class";
/// the node reached at depth `i + 1` stands for output neuron `i`. The path
/// for class `c` therefore visits neurons `0..=c`, the last one excitatory.
pub fn involved_set(class_index: usize, num_classes: usize) -> Result<InvolvedSet> {
    if class_index >= num_classes {
        return Err(Error::shape(format!(
            "class {class_index} out of range for {num_classes} classes"
        )));
    }
    let members = (0..=class_index).collect();
    Ok(InvolvedSet {
        members,
        excitatory: class_index,
    })
}

/// `d_a - d_t`, elementwise.
pub fn output_delta(actual: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if actual.len() != target.len() {
        return Err(Error::shape(format!(
            "{} actual delays but {} targets",
            actual.len(),
            target.len()
        )));
    }
    Ok(actual.iter().zip(target).map(|(a, t)| a - t).collect())
}

/// Per-sample temporal error, restricted to the involved set when the
/// heuristic loss is on.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalError {
    /// Output deltas; zero outside the involved set.
    pub delta: Vec<f64>,
    /// `sum (d_t - d_a)^2` over the involved outputs.
    pub squared_error: f64,
    /// Output neurons contributing to `squared_error`.
    pub involved: Vec<usize>,
}

pub fn temporal_error(
    actual: &[f64],
    scheme: &TargetScheme,
    class_index: usize,
    heuristic: bool,
) -> Result<TemporalError> {
    let target = scheme.target_vector(class_index)?;
    let mut delta = output_delta(actual, &target)?;
    let involved: Vec<usize> = if heuristic {
        let set = involved_set(class_index, scheme.num_classes)?;
        for (j, d) in delta.iter_mut().enumerate() {
            if !set.contains(j) {
                *d = 0.0;
            }
        }
        set.members
    } else {
        (0..delta.len()).collect()
    };
    let squared_error = involved.iter().map(|&j| delta[j] * delta[j]).sum();
    Ok(TemporalError {
        delta,
        squared_error,
        involved,
    })
}

/// Weight gradients, same layout as [`Network::weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients {
            layers: net.weights().iter().map(|w| vec![0.0; w.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().flatten().all(|&g| g == 0.0)
    }
}

/// Gradients of one sample's error with respect to every weight, given the
/// forward trace and output deltas (already masked to the involved set).
pub fn backward(net: &Network, trace: &ForwardTrace, delta_out: &[f64], mode: GradientMode) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(net);
    backward_into(net, trace, delta_out, mode, &mut grads)?;
    Ok(grads)
}

/// Like [`backward`], but adds into an existing accumulator.
pub fn backward_into(
    net: &Network,
    trace: &ForwardTrace,
    delta_out: &[f64],
    mode: GradientMode,
    grads: &mut Gradients,
) -> Result<()> {
    let sizes = net.layer_sizes();
    let layers = net.num_weight_layers();
    if trace.delays.len() != sizes.len()
        || trace.nets.len() != layers
        || trace.delays.iter().zip(sizes).any(|(d, &n)| d.len() != n)
    {
        return Err(Error::shape("forward trace does not match the network"));
    }
    if delta_out.len() != net.output_size() {
        return Err(Error::shape(format!(
            "{} output deltas for {} output neurons",
            delta_out.len(),
            net.output_size()
        )));
    }
    if grads.layers.len() != layers {
        return Err(Error::shape("gradient accumulator does not match the network"));
    }

    let act = net.activation();
    let mut delta: Vec<f64> = match mode {
        GradientMode::Simplified => delta_out.to_vec(),
        GradientMode::Exact => delta_out
            .iter()
            .zip(&trace.nets[layers - 1])
            .map(|(d, &net)| d * act.derivative(net))
            .collect(),
    };

    for l in (0..layers).rev() {
        let width = sizes[l + 1];
        let pre = &trace.delays[l];
        let fan_in = sizes[l] as f64;
        let g = &mut grads.layers[l];
        for (i, &d) in pre.iter().enumerate() {
            let scale = d / fan_in;
            if scale == 0.0 {
                continue;
            }
            let row = &mut g[i * width..(i + 1) * width];
            for (gij, &dj) in row.iter_mut().zip(&delta) {
                *gij += dj * scale;
            }
        }
        if l == 0 {
            break;
        }
        let w = &net.weights()[l];
        let nets = &trace.nets[l - 1];
        delta = (0..sizes[l])
            .map(|j| {
                let row = &w[j * width..(j + 1) * width];
                let sum: f64 = row.iter().zip(&delta).map(|(w, d)| w * d).sum();
                match mode {
                    GradientMode::Simplified => sum,
                    GradientMode::Exact => sum / fan_in * act.derivative(nets[j]),
                }
            })
            .collect();
    }
    Ok(())
}

/// Applies `w -= eta * g`.
pub fn apply_update(net: &mut Network, grads: &Gradients, eta: f64) {
    for (w, g) in net.weights_mut().iter_mut().zip(&grads.layers) {
        for (wij, gij) in w.iter_mut().zip(g) {
            *wij -= eta * gij;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Temporal mean-square error over the epoch's training passes.
    pub mse: f64,
    /// Accuracy of the training passes, measured before each batch update.
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
}

#[derive(Default)]
struct BatchStats {
    squared_error: f64,
    terms: usize,
    correct: usize,
}

impl BatchStats {
    fn merge(&mut self, other: BatchStats) {
        self.squared_error += other.squared_error;
        self.terms += other.terms;
        self.correct += other.correct;
    }
}

/// Trains `net` in place.
pub fn train(
    net: &mut Network,
    train_set: &[EncodedSample],
    test_set: Option<&[EncodedSample]>,
    scheme: &TargetScheme,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    train_with(net, train_set, test_set, scheme, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F>(
    net: &mut Network,
    train_set: &[EncodedSample],
    test_set: Option<&[EncodedSample]>,
    scheme: &TargetScheme,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate(scheme)?;
    if train_set.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if scheme.output_size() != net.output_size() {
        return Err(Error::shape(format!(
            "readout expects {} output neurons, network has {}",
            scheme.output_size(),
            net.output_size()
        )));
    }
    if let Some(bad) = train_set.iter().find(|s| s.input.len() != net.input_size()) {
        return Err(Error::shape(format!(
            "sample has {} input delays, network expects {}",
            bad.input.len(),
            net.input_size()
        )));
    }

    let mut rng = shuffle_rng(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut stats = BatchStats::default();
        for batch in order.chunks(cfg.batch_size) {
            let (grads, batch_stats) = batch_gradients(net, train_set, batch, scheme, cfg)?;
            stats.merge(batch_stats);
            if !stats.squared_error.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    mse: stats.squared_error,
                });
            }
            if let Some(grads) = grads {
                apply_update(net, &grads, cfg.eta);
            }
        }
        let mse = if stats.terms == 0 {
            0.0
        } else {
            stats.squared_error / stats.terms as f64
        };
        if !mse.is_finite() {
            return Err(Error::Diverged { epoch, mse });
        }
        let test_accuracy = match test_set {
            Some(test) if !test.is_empty() => Some(metrics::evaluate(net, test, scheme)?.accuracy),
            _ => None,
        };
        let record = EpochRecord {
            epoch,
            mse,
            train_accuracy: stats.correct as f64 / train_set.len() as f64,
            test_accuracy,
        };
        log::debug!(
            "epoch {epoch}: mse {:.4} train {:.4} test {:?}",
            record.mse,
            record.train_accuracy,
            record.test_accuracy
        );
        on_epoch(&record);
        report.history.push(record);
    }
    Ok(report)
}

/// Seeded RNG used for the per-epoch shuffle. Weight initialisation draws
/// from a different stream of the same seed.
pub fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// RNG for weight initialisation.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn batch_gradients(
    net: &Network,
    data: &[EncodedSample],
    batch: &[usize],
    scheme: &TargetScheme,
    cfg: &TrainConfig,
) -> Result<(Option<Gradients>, BatchStats)> {
    let chunk_results = map_chunks(batch, |chunk| chunk_gradients(net, data, chunk, scheme, cfg))?;
    let mut total: Option<Gradients> = None;
    let mut stats = BatchStats::default();
    for (grads, chunk_stats) in chunk_results {
        stats.merge(chunk_stats);
        match (&mut total, grads) {
            (Some(t), Some(g)) => t.add_assign(&g),
            (None, Some(g)) => total = Some(g),
            _ => {}
        }
    }
    Ok((total, stats))
}

/// Applies `f` to consecutive chunks of `items`, in parallel when the
/// `parallel` feature is on, and returns the results in chunk order.
#[cfg(feature = "parallel")]
pub(crate) fn map_chunks<I, T, F>(items: &[I], f: F) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&[I]) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_chunks(CHUNK).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_chunks<I, T, F>(items: &[I], f: F) -> Result<Vec<T>>
where
    F: Fn(&[I]) -> Result<T>,
{
    items.chunks(CHUNK).map(f).collect()
}

fn chunk_gradients(
    net: &Network,
    data: &[EncodedSample],
    chunk: &[usize],
    scheme: &TargetScheme,
    cfg: &TrainConfig,
) -> Result<(Option<Gradients>, BatchStats)> {
    let mut grads: Option<Gradients> = None;
    let mut stats = BatchStats::default();
    for &idx in chunk {
        let sample = &data[idx];
        let trace = net.forward_delays(&sample.input)?;
        let err = temporal_error(trace.output(), scheme, sample.label, cfg.heuristic)?;
        stats.squared_error += err.squared_error;
        stats.terms += err.involved.len();
        if !err.squared_error.is_finite() {
            // the caller reports divergence; no class can be read
            continue;
        }
        let predicted = scheme.read_class(trace.output())?;
        if predicted == sample.label {
            stats.correct += 1;
            if cfg.update_gate == UpdateGate::OnMisclassification {
                continue;
            }
        }
        let acc = grads.get_or_insert_with(|| Gradients::zeros_like(net));
        backward_into(net, &trace, &err.delta, cfg.gradient_mode, acc)?;
    }
    Ok((grads, stats))
}
