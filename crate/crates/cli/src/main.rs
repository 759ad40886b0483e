//! `mtspike` command-line tool.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtspike::commands;
use mtspike::config::{DatasetSpec, PRESETS};
use mtspike::srm::SrmParams;
use mtspike::{Error, ModelFile, RunConfig};

#[derive(Parser)]
#[command(
    name = "mtspike",
    version,
    about = "Single-spike temporal coding and ADR spiking networks"
)]
struct Cli {
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name or path to a TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: String,

    /// Output directory (default: the configuration's `output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode the training split and write delays plus a delay histogram.
    Encode {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train a network and write the model, metrics and confusion matrix.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Override the training seed.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Override the number of epochs.
        #[arg(long, value_name = "N")]
        epochs: Option<usize>,
        /// Override the training-set size (MNIST subsample or Iris split).
        #[arg(long, value_name = "N")]
        train_count: Option<usize>,
        /// Override the test-set size.
        #[arg(long, value_name = "N")]
        test_count: Option<usize>,
    },
    /// Evaluate a saved model on the configuration's test split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Model file written by `train`.
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Override the test-set size.
        #[arg(long, value_name = "N")]
        test_count: Option<usize>,
    },
    /// Print an SRM voltage trace as CSV (t,voltage,crossing).
    SrmDemo {
        /// Comma-separated input spike delays.
        #[arg(long, value_delimiter = ',', default_value = "2,5")]
        delays: Vec<f64>,
        /// Comma-separated efficacies, one per delay.
        #[arg(long, value_delimiter = ',', default_value = "1,1")]
        weights: Vec<f64>,
        /// Unit interval; sets the default kernel constants and step.
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Encoding window; the horizon defaults to twice this.
        #[arg(long, default_value_t = 16.0)]
        window: f64,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
        #[arg(long)]
        v_th: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Seed is accepted for interface symmetry; the demo is deterministic.
        #[arg(long, hide = true)]
        seed: Option<u64>,
    },
    /// List the shipped presets.
    Presets,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[E_USAGE]: {first}");
            return ExitCode::from(2);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MTSPIKE_LOG", "warn")).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Encode { run } => {
            let cfg = RunConfig::resolve(&run.config)?;
            let out = out_dir(&run, &cfg);
            let report = commands::cmd_encode(&cfg, &out)?;
            println!(
                "encoded {} samples into {} columns; wrote {} and {}",
                report.samples,
                report.columns,
                out.join(commands::ENCODED_FILE).display(),
                out.join(commands::HISTOGRAM_FILE).display()
            );
        }
        Command::Train {
            run,
            seed,
            epochs,
            train_count,
            test_count,
        } => {
            let mut cfg = RunConfig::resolve(&run.config)?;
            if let Some(seed) = seed {
                cfg.train.seed = seed;
            }
            if let Some(epochs) = epochs {
                cfg.train.epochs = epochs;
            }
            override_counts(&mut cfg.dataset, train_count, test_count);
            cfg.validate()?;
            let out = out_dir(&run, &cfg);
            let art = commands::cmd_train(&cfg, &out)?;
            let o = &art.outcome;
            println!("weights: {}", o.model.network.weight_count());
            if let Some(last) = o.history.last() {
                println!("final mse: {:.6}", last.mse);
            }
            println!("test accuracy: {:.4}", o.evaluation.accuracy);
            println!("spikes per inference: {:.2}", o.spikes_per_inference);
            println!("model: {}", art.model_path.display());
            println!("metrics: {}", art.metrics_path.display());
        }
        Command::Eval { run, model, test_count } => {
            let mut cfg = RunConfig::resolve(&run.config)?;
            override_counts(&mut cfg.dataset, None, test_count);
            let model = ModelFile::load(&model)?;
            let out = out_dir(&run, &cfg);
            let report = commands::cmd_eval(&model, &cfg, cfg.output.alpha, Some(&out))?;
            println!("samples: {}", report.samples);
            println!("accuracy: {:.4}", report.evaluation.accuracy);
            println!("pre-window firings: {}", report.evaluation.pre_window);
            println!(
                "spikes per inference: {:.2} (input {:.2}, hidden {:.2}, output {:.2})",
                report.spikes_per_inference,
                report.spikes.input as f64 / report.samples.max(1) as f64,
                report.spikes.hidden as f64 / report.samples.max(1) as f64,
                report.spikes.output as f64 / report.samples.max(1) as f64,
            );
            println!(
                "energy per inference: {:.2} alpha",
                report.energy_per_inference / cfg.output.alpha
            );
            println!("confusion: {}", out.join(commands::CONFUSION_FILE).display());
        }
        Command::SrmDemo {
            delays,
            weights,
            tau,
            window,
            tau1,
            tau2,
            v_th,
            dt,
            horizon,
            seed: _,
        } => {
            let mut p = SrmParams::demo(tau, window);
            p.tau1 = tau1.unwrap_or(p.tau1);
            p.tau2 = tau2.unwrap_or(p.tau2);
            p.v_th = v_th.unwrap_or(p.v_th);
            p.dt = dt.unwrap_or(p.dt);
            p.horizon = horizon.unwrap_or(p.horizon);
            let crossing = commands::srm_demo(&delays, &weights, &p, io::stdout().lock())?;
            match crossing {
                Some(t) => log::info!("threshold crossed at t = {t}"),
                None => log::info!("no threshold crossing before t = {}", p.horizon),
            }
        }
        Command::Presets => {
            for (name, _) in PRESETS {
                let cfg = RunConfig::preset(name)?;
                println!("{name}\t{:?}\t{} weights", cfg.layers, cfg.weight_count());
            }
        }
    }
    Ok(())
}

fn out_dir(run: &RunArgs, cfg: &RunConfig) -> PathBuf {
    run.out
        .clone()
        .unwrap_or_else(|| Path::new(&cfg.output.dir).to_path_buf())
}

fn override_counts(spec: &mut DatasetSpec, train: Option<usize>, test: Option<usize>) {
    match spec {
        DatasetSpec::Iris {
            train_count,
            test_count,
            ..
        } => {
            *train_count = train.unwrap_or(*train_count);
            *test_count = test.unwrap_or(*test_count);
        }
        DatasetSpec::Mnist {
            train_count,
            test_count,
            ..
        } => {
            *train_count = train.or(*train_count);
            *test_count = test.or(*test_count);
        }
    }
}
