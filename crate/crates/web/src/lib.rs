//! Browser demo: encode a hand-drawn digit, explore the SRM threshold
//! crossing, and train an ADR network on Iris, all client side.
//!
//! Every export returns a JSON string; the page parses it. The logic lives in
//! plain functions so it is testable off the browser.

use std::path::Path;

use mtspike::coding::{delay_histogram, encode_conv_like, encode_pixels_1to1, neuron_count, CodingParams};
use mtspike::datasets::{encode_dataset, parse_iris, split, CodingScheme, CodingSnapshot, EncodedSample};
use mtspike::learning::{init_rng, train, GradientMode, TrainConfig};
use mtspike::metrics::evaluate;
use mtspike::srm::{threshold_crossing, voltage_trace, SrmParams};
use mtspike::{Activation, DelayVector, Network, TargetScheme};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const IRIS_CSV: &str = include_str!("../../../data/iris.csv");
const WINDOW: f64 = 16.0;
const TAU: f64 = 1.0;

#[derive(Serialize)]
struct Encoding {
    delays: Vec<f64>,
    fired: Vec<bool>,
    side: usize,
    neurons: usize,
    spikes: usize,
    histogram: Vec<usize>,
}

/// Encodes a `side x side` grayscale image with the conv-like (`kernel`,
/// `stride`) or the 1-1 pixel scheme.
pub fn encode_image(
    pixels: &[u8],
    side: usize,
    conv_like: bool,
    kernel: usize,
    stride: usize,
    threshold: u8,
) -> Result<String, String> {
    let (delays, out_side, p) = if conv_like {
        let p = CodingParams::new((kernel * kernel) as f64 * TAU, TAU)
            .with_kernel(kernel, stride)
            .with_threshold(threshold);
        p.validate_conv().map_err(|e| e.to_string())?;
        if kernel > side {
            return Err(format!("kernel {kernel} exceeds image width {side}"));
        }
        let d = encode_conv_like(pixels, side, &p).map_err(|e| e.to_string())?;
        (d, neuron_count(side, kernel, stride).isqrt(), p)
    } else {
        let p = CodingParams::new(WINDOW, TAU);
        (
            encode_pixels_1to1(pixels, side, 255, &p).map_err(|e| e.to_string())?,
            side,
            p,
        )
    };
    let histogram = delay_histogram([&delays], &p).map_err(|e| e.to_string())?;
    let enc = Encoding {
        neurons: delays.len(),
        spikes: delays.spike_count(),
        side: out_side,
        histogram,
        delays: delays.delays,
        fired: delays.fired,
    };
    serde_json::to_string(&enc).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Trace {
    t: Vec<f64>,
    v: Vec<f64>,
    crossing: Option<f64>,
    v_th: f64,
}

/// SRM voltage trace and first threshold crossing.
pub fn srm_trace_json(
    delays: &[f64],
    weights: &[f64],
    tau1: f64,
    tau2: f64,
    v_th: f64,
    horizon: f64,
) -> Result<String, String> {
    let p = SrmParams {
        tau1,
        tau2,
        v_th,
        dt: tau2.min(tau1) / 10.0,
        horizon,
    };
    let spikes = DelayVector::from_delays(delays.to_vec());
    let crossing = threshold_crossing(&spikes, weights, &p).map_err(|e| e.to_string())?;
    let (t, v) = voltage_trace(&spikes, weights, &p)
        .map_err(|e| e.to_string())?
        .into_iter()
        .unzip();
    serde_json::to_string(&Trace { t, v, crossing, v_th }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Progress {
    epoch: usize,
    mse: f64,
    train_accuracy: f64,
    test_accuracy: f64,
    /// Output delay per test sample, with its label, for plotting.
    outputs: Vec<(f64, usize)>,
    checkpoints: Vec<f64>,
}

/// Iris with a single-output ADR network and checkpoint readout.
pub struct IrisSession {
    net: Network,
    scheme: TargetScheme,
    cfg: TrainConfig,
    train: Vec<EncodedSample>,
    test: Vec<EncodedSample>,
    epoch: usize,
}

impl IrisSession {
    pub fn new(hidden: usize, eta: f64, batch_size: usize, exact: bool, seed: u64) -> Result<Self, String> {
        let raw = parse_iris(Path::new("iris.csv"), IRIS_CSV.as_bytes()).map_err(|e| e.to_string())?;
        let (train_raw, test_raw) = split(&raw, 120, 30, seed).map_err(|e| e.to_string())?;
        let coding = CodingSnapshot::fit(CodingScheme::Numeric, CodingParams::new(WINDOW, TAU), &train_raw)
            .map_err(|e| e.to_string())?;
        let train = encode_dataset(&train_raw, &coding).map_err(|e| e.to_string())?.samples;
        let test = encode_dataset(&test_raw, &coding).map_err(|e| e.to_string())?.samples;
        let mut sizes = vec![4];
        if hidden > 0 {
            sizes.push(hidden);
        }
        sizes.push(1);
        let net = Network::random(sizes, Activation::SpecialRelu, &mut init_rng(seed)).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            eta,
            batch_size,
            epochs: 1,
            seed,
            gradient_mode: if exact {
                GradientMode::Exact
            } else {
                GradientMode::Simplified
            },
            ..TrainConfig::default()
        };
        let scheme = TargetScheme::single_neuron(WINDOW, 3.0, 3);
        cfg.validate(&scheme).map_err(|e| e.to_string())?;
        Ok(IrisSession {
            net,
            scheme,
            cfg,
            train,
            test,
            epoch: 0,
        })
    }

    /// Runs `epochs` more epochs and reports the state after the last one.
    pub fn step(&mut self, epochs: usize) -> Result<String, String> {
        let mut last = None;
        for _ in 0..epochs.max(1) {
            // a fresh seed per epoch keeps the shuffle moving between calls
            self.cfg.seed = self.cfg.seed.wrapping_add(1);
            let report = train(&mut self.net, &self.train, None, &self.scheme, &self.cfg).map_err(|e| e.to_string())?;
            self.epoch += 1;
            last = report.history.into_iter().last();
        }
        let last = last.expect("at least one epoch");
        let eval = evaluate(&self.net, &self.test, &self.scheme).map_err(|e| e.to_string())?;
        let outputs = self
            .test
            .iter()
            .map(|s| Ok((self.net.forward_delays(&s.input)?.output()[0], s.label)))
            .collect::<mtspike::Result<Vec<_>>>()
            .map_err(|e| e.to_string())?;
        let p = Progress {
            epoch: self.epoch,
            mse: last.mse,
            train_accuracy: last.train_accuracy,
            test_accuracy: eval.accuracy,
            outputs,
            checkpoints: (0..3).map(|c| self.scheme.checkpoint(c)).collect(),
        };
        serde_json::to_string(&p).map_err(|e| e.to_string())
    }
}

#[wasm_bindgen]
pub fn encode_digit(
    pixels: &[u8],
    side: usize,
    conv_like: bool,
    kernel: usize,
    stride: usize,
    threshold: u8,
) -> Result<String, JsError> {
    encode_image(pixels, side, conv_like, kernel, stride, threshold).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn srm_trace(
    delays: &[f64],
    weights: &[f64],
    tau1: f64,
    tau2: f64,
    v_th: f64,
    horizon: f64,
) -> Result<String, JsError> {
    srm_trace_json(delays, weights, tau1, tau2, v_th, horizon).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct IrisTrainer(IrisSession);

#[wasm_bindgen]
impl IrisTrainer {
    #[wasm_bindgen(constructor)]
    pub fn new(hidden: usize, eta: f64, batch_size: usize, exact: bool, seed: u32) -> Result<IrisTrainer, JsError> {
        IrisSession::new(hidden, eta, batch_size, exact, u64::from(seed))
            .map(IrisTrainer)
            .map_err(|e| JsError::new(&e))
    }

    pub fn step(&mut self, epochs: usize) -> Result<String, JsError> {
        self.0.step(epochs).map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_digit_encodes_to_full_delays() {
        let json = encode_image(&[0u8; 784], 28, true, 4, 2, 128).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["neurons"], 169);
        assert_eq!(v["side"], 13);
        assert_eq!(v["histogram"][16], 169);
        let json = encode_image(&[0u8; 784], 28, false, 4, 2, 128).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["spikes"], 0);
    }

    #[test]
    fn bad_geometry_is_an_error() {
        assert!(encode_image(&[0u8; 784], 28, true, 30, 2, 128).is_err());
        assert!(encode_image(&[0u8; 784], 28, true, 4, 0, 128).is_err());
        assert!(encode_image(&[0u8; 10], 28, false, 4, 2, 128).is_err());
    }

    #[test]
    fn srm_trace_reports_crossing() {
        let v: serde_json::Value =
            serde_json::from_str(&srm_trace_json(&[2.0], &[1.0], 4.0, 1.0, 0.3, 16.0).unwrap()).unwrap();
        let t = v["crossing"].as_f64().unwrap();
        assert!(t > 2.0 && t < 4.0);
        assert!(srm_trace_json(&[2.0], &[1.0], 1.0, 4.0, 0.3, 16.0).is_err());
    }

    #[test]
    fn iris_session_steps() {
        let mut s = IrisSession::new(25, 0.001, 30, true, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.step(3).unwrap()).unwrap();
        assert_eq!(v["epoch"], 3);
        assert_eq!(v["outputs"].as_array().unwrap().len(), 30);
    }
}
