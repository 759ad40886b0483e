//! Average Delay Response network: every neuron emits a single spike whose
//! delay is the fan-in-normalised weighted sum of its input delays, passed
//! through a non-negative clip ("special ReLU").

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coding::DelayVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    /// `max(0, x)`: a neuron cannot fire before time zero.
    #[default]
    SpecialRelu,
    /// Unclipped; makes the network linear in its input delays.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::SpecialRelu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Subgradient with the convention `phi'(0) = 0` for the clipped case.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::SpecialRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Output delay of one neuron: `phi((1/n) * sum_i w_i * d_i)` with `n` the
/// fan-in.
pub fn adr_neuron(pre_delays: &[f64], weights_column: &[f64], activation: Activation) -> Result<f64> {
    if pre_delays.is_empty() {
        return Err(Error::shape("neuron has zero fan-in"));
    }
    if pre_delays.len() != weights_column.len() {
        return Err(Error::shape(format!(
            "{} input delays but {} weights",
            pre_delays.len(),
            weights_column.len()
        )));
    }
    let mut acc = 0.0;
    for (&w, &d) in weights_column.iter().zip(pre_delays) {
        acc += w * d;
    }
    Ok(activation.apply(acc / pre_delays.len() as f64))
}

/// Dense weight matrices between consecutive layers.
///
/// `weights[l]` connects layer `l` to layer `l + 1` and is stored row-major
/// with shape `layer_sizes[l] x layer_sizes[l + 1]`, so `w[i][j]` (pre-synaptic
/// `i`, post-synaptic `j`) lives at `i * layer_sizes[l + 1] + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    activation: Activation,
}

/// Nets and delays of every layer for one sample. `delays[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub nets: Vec<Vec<f64>>,
    pub delays: Vec<Vec<f64>>,
}

impl ForwardTrace {
    /// Actual output delays `d_a`.
    pub fn output(&self) -> &[f64] {
        self.delays.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Network {
    pub fn from_weights(layer_sizes: Vec<usize>, weights: Vec<Vec<f64>>, activation: Activation) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        if weights.len() != layer_sizes.len() - 1 {
            return Err(Error::shape(format!(
                "{} layers need {} weight matrices, got {}",
                layer_sizes.len(),
                layer_sizes.len() - 1,
                weights.len()
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            let expected = layer_sizes[l] * layer_sizes[l + 1];
            if w.len() != expected {
                return Err(Error::shape(format!(
                    "weight matrix {l} should hold {}x{} = {expected} values, got {}",
                    layer_sizes[l],
                    layer_sizes[l + 1],
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().position(|v| !v.is_finite()) {
                return Err(Error::shape(format!("weight matrix {l} entry {bad} is not finite")));
            }
        }
        Ok(Network {
            layer_sizes,
            weights,
            activation,
        })
    }

    /// Weights drawn independently and uniformly from the open interval (0, 1).
    pub fn random<R: Rng + ?Sized>(layer_sizes: Vec<usize>, activation: Activation, rng: &mut R) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|pair| (0..pair[0] * pair[1]).map(|_| rng.sample(Open01)).collect())
            .collect();
        Network::from_weights(layer_sizes, weights, activation)
    }

    /// Every weight set to `value`.
    pub fn constant(layer_sizes: Vec<usize>, value: f64, activation: Activation) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let weights = layer_sizes
            .windows(2)
            .map(|pair| vec![value; pair[0] * pair[1]])
            .collect();
        Network::from_weights(layer_sizes, weights, activation)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_weight_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn weight(&self, layer: usize, pre: usize, post: usize) -> f64 {
        self.weights[layer][pre * self.layer_sizes[layer + 1] + post]
    }

    /// Incoming weights of neuron `post` in layer `layer + 1`.
    pub fn column(&self, layer: usize, post: usize) -> Vec<f64> {
        let width = self.layer_sizes[layer + 1];
        self.weights[layer].iter().skip(post).step_by(width).copied().collect()
    }

    /// Total number of synaptic weights.
    pub fn weight_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardTrace> {
        if input.len() != self.input_size() {
            return Err(Error::shape(format!(
                "input has {} delays, network expects {}",
                input.len(),
                self.input_size()
            )));
        }
        let mut nets = Vec::with_capacity(self.weights.len());
        let mut delays = Vec::with_capacity(self.layer_sizes.len());
        delays.push(input.to_vec());
        for (l, w) in self.weights.iter().enumerate() {
            let width = self.layer_sizes[l + 1];
            let pre = &delays[l];
            let mut acc = vec![0.0; width];
            for (i, &d) in pre.iter().enumerate() {
                let row = &w[i * width..(i + 1) * width];
                for (a, &wij) in acc.iter_mut().zip(row) {
                    *a += wij * d;
                }
            }
            let fan_in = pre.len() as f64;
            for a in acc.iter_mut() {
                *a /= fan_in;
            }
            let out = acc.iter().map(|&x| self.activation.apply(x)).collect();
            nets.push(acc);
            delays.push(out);
        }
        Ok(ForwardTrace { nets, delays })
    }

    /// Forward pass on an encoded sample. Non-fired entries already carry the
    /// window delay, so the raw delays are used as-is.
    pub fn forward_delays(&self, input: &DelayVector) -> Result<ForwardTrace> {
        self.forward(&input.delays)
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::shape(format!(
            "a network needs at least an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::shape(format!("empty layer in {layer_sizes:?}")));
    }
    Ok(())
}
