//! End-to-end runs through the library entry points: configure, train, save,
//! reload, evaluate, encode.

use std::fs;
use std::path::{Path, PathBuf};

use mtspike::commands::{self, CONFIG_FILE, CONFUSION_FILE, ENCODED_FILE, HISTOGRAM_FILE, METRICS_FILE, MODEL_FILE};
use mtspike::config::DatasetSpec;
use mtspike::datasets::{write_idx_images, write_idx_labels};
use mtspike::{GradientMode, ModelFile, RunConfig};

fn iris_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv")
}

fn small_iris() -> RunConfig {
    let mut cfg = RunConfig::preset("mt1-iris").unwrap();
    if let DatasetSpec::Iris { path, .. } = &mut cfg.dataset {
        *path = iris_path();
    }
    cfg.layers = vec![4, 8, 1];
    cfg.train.epochs = 20;
    cfg.train.eta = 0.001;
    cfg.train.gradient_mode = GradientMode::Exact;
    cfg
}

/// Ten classes of 28x28 images, class `c` being a vertical bar at column
/// `2 + 2c` with a little per-sample jitter in its height.
fn bar_digits(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let mut pixels = vec![0u8; n * 784];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 10;
        labels.push(c as u8);
        let img = &mut pixels[i * 784..(i + 1) * 784];
        for row in 4 + i % 3..24 {
            for col in 2 + 2 * c..5 + 2 * c {
                img[row * 28 + col] = 255;
            }
        }
    }
    let images = dir.join("images-idx3-ubyte");
    let label_file = dir.join("labels-idx1-ubyte");
    fs::write(&images, write_idx_images(28, 28, &pixels)).unwrap();
    fs::write(&label_file, write_idx_labels(&labels)).unwrap();
    (images, label_file)
}

fn bar_config(dir: &Path) -> RunConfig {
    let (images, labels) = bar_digits(dir, 200);
    let mut cfg = RunConfig::preset("slmt10-noheu").unwrap();
    cfg.dataset = DatasetSpec::Mnist {
        train_images: images.clone(),
        train_labels: labels.clone(),
        test_images: images,
        test_labels: labels,
        train_count: Some(150),
        test_count: Some(50),
        split_seed: 3,
    };
    cfg.train.epochs = 10;
    // bars are far more uniform than handwriting, so a smaller step keeps
    // the summed batch update from silencing every output neuron
    cfg.train.eta = 0.05;
    cfg
}

#[test]
fn train_save_reload_evaluate_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_iris();
    let art = commands::cmd_train(&cfg, dir.path()).unwrap();
    for f in [MODEL_FILE, METRICS_FILE, CONFUSION_FILE, CONFIG_FILE] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }

    let metrics = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("epoch,mse,train_acc,test_acc,spikes,energy"));
    assert_eq!(lines.count(), 20);

    let model = ModelFile::load(&art.model_path).unwrap();
    assert_eq!(model, art.outcome.model);
    assert_eq!(model.meta.provenance.epochs_run, 20);

    let report = commands::cmd_eval(&model, &cfg, 1.0, None).unwrap();
    assert_eq!(report.samples, 30);
    assert_eq!(report.evaluation.accuracy, art.outcome.evaluation.accuracy);
    assert_eq!(report.evaluation.confusion, art.outcome.evaluation.confusion);

    // accuracy is the confusion diagonal over the total
    let c = &report.evaluation.confusion.counts;
    let diag: usize = (0..3).map(|i| c[i][i]).sum();
    let total: usize = c.iter().flatten().sum();
    assert_eq!(total, 30);
    assert_eq!(report.evaluation.accuracy, diag as f64 / 30.0);

    // a 4-8-1 network emits 4 + 8 + 1 spikes when every neuron fires, and
    // the numeric coding fires every input
    assert!(report.spikes_per_inference <= 13.0 && report.spikes_per_inference >= 4.0);
    assert_eq!(report.energy_per_inference, report.spikes_per_inference);

    // the written configuration reproduces the run
    let again = RunConfig::load(dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn training_is_deterministic_per_seed() {
    let cfg = small_iris();
    let data = commands::prepare(&cfg).unwrap();
    let a = commands::train_prepared(&cfg, &data, |_| {}).unwrap();
    let b = commands::train_prepared(&cfg, &data, |_| {}).unwrap();
    assert_eq!(a.model.network, b.model.network);
    let mut other = cfg.clone();
    other.train.seed = 1;
    let c = commands::train_prepared(&other, &data, |_| {}).unwrap();
    assert_ne!(a.model.network, c.model.network);
}

#[test]
fn synthetic_digits_learn_and_encode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bar_config(dir.path());
    let out = dir.path().join("run");
    let art = commands::cmd_train(&cfg, &out).unwrap();
    assert!(
        art.outcome.evaluation.accuracy >= 0.9,
        "accuracy {}, history {:?}",
        art.outcome.evaluation.accuracy,
        art.outcome.history
    );
    let confusion = fs::read_to_string(&art.confusion_path).unwrap();
    assert!(confusion.starts_with("actual\\predicted,0,1,2,3,4,5,6,7,8,9"));
    assert_eq!(confusion.lines().count(), 11);

    let report = commands::cmd_encode(&cfg, &out).unwrap();
    assert_eq!(report.samples, 150);
    assert_eq!(report.columns, 170);
    // conv-like coding fires every patch, so the histogram holds one entry
    // per patch per sample
    assert_eq!(report.histogram.iter().sum::<usize>(), 150 * 169);
    let encoded = fs::read_to_string(out.join(ENCODED_FILE)).unwrap();
    assert_eq!(encoded.lines().count(), 151);
    assert!(encoded.lines().all(|l| l.split(',').count() == 170));
    let hist = fs::read_to_string(out.join(HISTOGRAM_FILE)).unwrap();
    assert_eq!(hist.lines().next(), Some("slot,delay,count"));
    assert_eq!(hist.lines().count(), 1 + 17);
}

#[test]
fn encoded_rows_match_a_direct_patch_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bar_config(dir.path());
    let data = commands::prepare(&cfg).unwrap();
    let (raw, _) = cfg.dataset.load().unwrap();
    let mtspike::RawDataset::Images(images) = raw else {
        panic!("expected images")
    };
    for (i, s) in data.train.samples.iter().enumerate().take(20) {
        let img = images.image(i);
        for (m, &d) in s.input.delays.iter().enumerate() {
            let (py, px) = (m / 13 * 2, m % 13 * 2);
            let zeros = (0..16).filter(|k| img[(py + k / 4) * 28 + px + k % 4] < 128).count();
            assert_eq!(d, zeros as f64, "sample {i} patch {m}");
        }
    }
}

#[test]
fn bad_configurations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_iris();
    cfg.layers = vec![5, 8, 1];
    assert_eq!(commands::cmd_train(&cfg, dir.path()).unwrap_err().code(), "E_CONFIG");

    let mut cfg = small_iris();
    if let DatasetSpec::Iris { path, .. } = &mut cfg.dataset {
        *path = dir.path().join("absent.csv");
    }
    assert_eq!(commands::cmd_train(&cfg, dir.path()).unwrap_err().code(), "E_IO");

    let text = small_iris()
        .to_toml()
        .unwrap()
        .replace("batch_size = 30", "batch_size = 0");
    assert!(RunConfig::from_toml(&text).is_err());
    assert!(RunConfig::from_toml("name = \"x\"\nbogus = 1").is_err());
}
