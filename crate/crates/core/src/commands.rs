//! The operations behind the command-line subcommands, usable as a library.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::coding::{delay_histogram, DelayVector};
use crate::config::RunConfig;
use crate::datasets::{encode_dataset, CodingSnapshot, EncodedDataset};
use crate::error::{Error, Result};
use crate::learning::{init_rng, train_with, EpochRecord};
use crate::metrics::{self, Evaluation, MetricsRow, SpikeCount};
use crate::model_file::{FinalMetrics, ModelFile, ModelMeta, Provenance};
use crate::network::Network;
use crate::srm::{self, SrmParams};

pub const MODEL_FILE: &str = "model.mtsk";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const ENCODED_FILE: &str = "encoded.csv";
pub const HISTOGRAM_FILE: &str = "histogram.csv";

/// Encoded train and test splits of a run.
#[derive(Debug)]
pub struct PreparedData {
    pub train: EncodedDataset,
    pub test: EncodedDataset,
}

/// Loads, splits and encodes the configured dataset. The coding is fitted on
/// the training split only.
pub fn prepare(cfg: &RunConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let (train_raw, test_raw) = cfg.dataset.load()?;
    let coding = CodingSnapshot::fit(cfg.coding.scheme, cfg.coding.params.clone(), &train_raw)?;
    if coding.input_size() != cfg.layers[0] {
        return Err(Error::shape(format!(
            "the coding produces {} inputs, the first layer has {}",
            coding.input_size(),
            cfg.layers[0]
        )));
    }
    Ok(PreparedData {
        train: encode_dataset(&train_raw, &coding)?,
        test: encode_dataset(&test_raw, &coding)?,
    })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub history: Vec<EpochRecord>,
    /// Evaluation on the test split (on the training split when the test
    /// split is empty).
    pub evaluation: Evaluation,
    /// Mean spikes per inference over the evaluated split.
    pub spikes_per_inference: f64,
    pub spikes: SpikeCount,
    pub class_names: Vec<String>,
}

/// Trains the configured network on already prepared data.
pub fn train_prepared<F>(cfg: &RunConfig, data: &PreparedData, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord),
{
    let mut net = Network::random(cfg.layers.clone(), cfg.activation, &mut init_rng(cfg.train.seed))?;
    let test = (!data.test.is_empty()).then_some(data.test.samples.as_slice());
    let report = train_with(&mut net, &data.train.samples, test, &cfg.readout, &cfg.train, |r| {
        on_epoch(r)
    })?;

    let eval_set = if data.test.is_empty() { &data.train } else { &data.test };
    let evaluation = metrics::evaluate(&net, &eval_set.samples, &cfg.readout)?;
    let spikes = metrics::total_spikes(&eval_set.samples, &net)?;
    let spikes_per_inference = if eval_set.is_empty() {
        0.0
    } else {
        spikes.total() as f64 / eval_set.len() as f64
    };

    let final_metrics = report.history.last().map(|r| FinalMetrics {
        mse: r.mse,
        train_accuracy: r.train_accuracy,
        test_accuracy: r.test_accuracy,
    });
    let model = ModelFile {
        meta: ModelMeta {
            activation: cfg.activation,
            coding: data.train.coding.clone(),
            scheme: cfg.readout.clone(),
            class_names: data.train.class_names.clone(),
            provenance: Provenance {
                train: cfg.train.clone(),
                epochs_run: report.history.len(),
                final_metrics,
                sources: data.train.sources.clone(),
                split_seed: cfg.dataset.split_seed(),
                library_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        },
        network: net,
    };
    Ok(TrainOutcome {
        model,
        history: report.history,
        evaluation,
        spikes_per_inference,
        spikes,
        class_names: data.train.class_names.clone(),
    })
}

/// Paths written by [`cmd_train`].
#[derive(Debug)]
pub struct TrainArtifacts {
    pub outcome: TrainOutcome,
    pub model_path: PathBuf,
    pub metrics_path: PathBuf,
    pub confusion_path: PathBuf,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Trains and writes the model file, the metrics CSV, the test confusion
/// matrix and the effective configuration into `out_dir`.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainArtifacts> {
    let data = prepare(cfg)?;
    log::info!(
        "{}: {} training and {} test samples, {} weights",
        cfg.name,
        data.train.len(),
        data.test.len(),
        cfg.weight_count()
    );
    create_dir(out_dir)?;
    let outcome = train_prepared(cfg, &data, |r| {
        log::info!(
            "epoch {}: mse {:.4}, train {:.4}, test {}",
            r.epoch,
            r.mse,
            r.train_accuracy,
            r.test_accuracy.map_or("-".to_string(), |a| format!("{a:.4}"))
        );
    })?;

    // every epoch's row carries the final model's spike statistics: the count
    // depends only on the architecture and the coded inputs, not on weights
    let rows: Vec<MetricsRow> = outcome
        .history
        .iter()
        .map(|r| MetricsRow::from_record(r, outcome.spikes_per_inference, cfg.output.alpha))
        .collect();
    let model_path = out_dir.join(MODEL_FILE);
    let metrics_path = out_dir.join(METRICS_FILE);
    let confusion_path = out_dir.join(CONFUSION_FILE);
    outcome.model.save(&model_path)?;
    metrics::write_metrics_csv(&metrics_path, &rows)?;
    metrics::write_confusion_csv(&confusion_path, &outcome.evaluation.confusion, &outcome.class_names)?;
    let config_path = out_dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;
    Ok(TrainArtifacts {
        outcome,
        model_path,
        metrics_path,
        confusion_path,
    })
}

#[derive(Debug)]
pub struct EvalReport {
    pub evaluation: Evaluation,
    pub samples: usize,
    pub spikes: SpikeCount,
    pub spikes_per_inference: f64,
    pub energy_per_inference: f64,
}

/// Evaluates a saved model on the test split of `cfg`'s dataset, encoded with
/// the model's own coding snapshot. Writes the confusion matrix when
/// `out_dir` is given.
pub fn cmd_eval(model: &ModelFile, cfg: &RunConfig, alpha: f64, out_dir: Option<&Path>) -> Result<EvalReport> {
    let (_, test_raw) = cfg.dataset.load()?;
    let test = encode_dataset(&test_raw, &model.meta.coding)?;
    if test.num_classes() != model.meta.scheme.num_classes {
        return Err(Error::shape(format!(
            "model reads {} classes, dataset has {}",
            model.meta.scheme.num_classes,
            test.num_classes()
        )));
    }
    let evaluation = metrics::evaluate(&model.network, &test.samples, &model.meta.scheme)?;
    let spikes = metrics::total_spikes(&test.samples, &model.network)?;
    let spikes_per_inference = if test.is_empty() {
        0.0
    } else {
        spikes.total() as f64 / test.len() as f64
    };
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        metrics::write_confusion_csv(dir.join(CONFUSION_FILE), &evaluation.confusion, &model.meta.class_names)?;
    }
    Ok(EvalReport {
        evaluation,
        samples: test.len(),
        spikes,
        spikes_per_inference,
        energy_per_inference: metrics::energy(1, alpha)? * spikes_per_inference,
    })
}

#[derive(Debug)]
pub struct EncodeReport {
    pub samples: usize,
    pub columns: usize,
    pub histogram: Vec<usize>,
}

/// Writes the encoded training split (`label,d0,d1,...`, silent entries as
/// `-`) and a histogram of fired delays over the grid slots `0..=R`.
pub fn cmd_encode(cfg: &RunConfig, out_dir: &Path) -> Result<EncodeReport> {
    let data = prepare(cfg)?;
    create_dir(out_dir)?;
    let encoded_path = out_dir.join(ENCODED_FILE);
    write_encoded_csv(&encoded_path, &data.train)?;

    let params = data.train.coding.params();
    let histogram = delay_histogram(data.train.samples.iter().map(|s| &s.input), params)?;
    let hist_path = out_dir.join(HISTOGRAM_FILE);
    let mut w = csv::Writer::from_path(&hist_path).map_err(|e| csv_io(&hist_path, e))?;
    w.write_record(["slot", "delay", "count"])
        .map_err(|e| csv_io(&hist_path, e))?;
    for (slot, count) in histogram.iter().enumerate() {
        let delay = slot as f64 * params.tau;
        w.write_record([slot.to_string(), delay.to_string(), count.to_string()])
            .map_err(|e| csv_io(&hist_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&hist_path, e))?;
    Ok(EncodeReport {
        samples: data.train.len(),
        columns: 1 + data.train.coding.input_size(),
        histogram,
    })
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_encoded_csv(path: &Path, data: &EncodedDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let width = data.coding.input_size();
    let mut header = vec!["label".to_string()];
    header.extend((0..width).map(|i| format!("d{i}")));
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for s in &data.samples {
        let mut row = vec![data.class_names[s.label].clone()];
        row.extend(
            s.input
                .delays
                .iter()
                .zip(&s.input.fired)
                .map(|(d, &f)| if f { d.to_string() } else { "-".to_string() }),
        );
        w.write_record(&row).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `t,voltage,crossing` rows of the SRM voltage trace; `crossing` is 1
/// on the first threshold crossing only. Returns the crossing time.
pub fn srm_demo<W: Write>(delays: &[f64], weights: &[f64], params: &SrmParams, out: W) -> Result<Option<f64>> {
    let spikes = DelayVector::from_delays(delays.to_vec());
    let crossing = srm::threshold_crossing(&spikes, weights, params)?;
    let trace = srm::voltage_trace(&spikes, weights, params)?;
    let stdout_err = |e: csv::Error| Error::Format {
        path: PathBuf::from("<output>"),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "voltage", "crossing"]).map_err(stdout_err)?;
    for (t, v) in trace {
        let hit = crossing == Some(t);
        w.write_record([format!("{t:.6}"), format!("{v:.9}"), u8::from(hit).to_string()])
            .map_err(stdout_err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(crossing)
}
