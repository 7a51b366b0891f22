use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gesturekit::classifier::{Arch, Classifier, ClassifierConfig};
use gesturekit::commands::{self, FrameSource};
use gesturekit::config::RunConfig;
use gesturekit::dataset::{SynthSpec, SyntheticVideo};
use gesturekit::eval::Subset;
use gesturekit::hmi::load_trace;
use gesturekit::{Error, Result, VERSION_LINE};

#[derive(Parser)]
#[command(name = "gk", version = VERSION_LINE, about = "Hand-gesture pipeline: synthesize, train, evaluate, segment, track, run, bench")]
struct Cli {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set tracking.q=0.1`. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for synth and bench.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gesture-mask dataset.
    Synth {
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated class names replacing the shape names.
        #[arg(long, value_delimiter = ',')]
        names: Vec<String>,
        /// Output directory (default `io.dataset`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier on a dataset and save the best weights.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        arch: Option<Arch>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate weights: metrics, confusion matrix and per-fold t-test.
    Eval {
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// train, val, test or all.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Segment frames and write per-frame hand regions.
    Segment {
        /// Directory with `background.ppm` and frames; synthetic video when omitted.
        #[arg(long)]
        frames: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kalman-track hand centroids into a cursor trace.
    Track {
        /// Regions JSONL from `gk segment`; segments synthetic video when omitted.
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive a simulated application from a trace or from classified video.
    Run {
        #[arg(long)]
        context: Option<String>,
        /// Observation trace (JSONL). Without it, synthetic video is classified with `--weights`.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure pipeline throughput on synthetic 640x480 frames.
    Bench {
        #[arg(long, default_value_t = 1000)]
        frames: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        /// Trained weights; an untrained tiny CNN is timed when omitted.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn set(key: &str, value: impl std::fmt::Display) -> String {
    format!("{key}={value}")
}

fn path_set(key: &str, p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| set(key, serde_json::Value::String(p.display().to_string())))
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut overrides = cli.overrides.clone();
    let extra: Vec<Option<String>> = match &cli.command {
        Command::Synth { seed, out, .. } => vec![seed.map(|s| set("seed", s)), path_set("io.dataset", out)],
        Command::Train {
            dataset,
            weights,
            arch,
            epochs,
            seed,
            out,
        } => vec![
            path_set("io.dataset", dataset),
            path_set("io.weights", weights),
            arch.map(|a| set("classifier.arch", serde_json::to_string(&a).expect("arch"))),
            epochs.map(|e| set("classifier.epochs", e)),
            seed.map(|s| set("seed", s)),
            path_set("io.out_dir", out),
        ],
        Command::Eval {
            weights, dataset, out, ..
        } => vec![
            path_set("io.weights", weights),
            path_set("io.dataset", dataset),
            path_set("io.out_dir", out),
        ],
        Command::Segment { out, .. } | Command::Track { out, .. } => vec![path_set("io.out_dir", out)],
        Command::Run {
            context, weights, out, ..
        } => vec![
            context.as_ref().map(|c| set("hmi.context", c)),
            path_set("io.weights", weights),
            path_set("io.out_dir", out),
        ],
        Command::Bench { frames, out, .. } => vec![Some(set("video.frames", frames)), path_set("io.out_dir", out)],
    };
    overrides.extend(extra.into_iter().flatten());
    base.with_overrides(&overrides)
}

fn execute(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Synth {
            classes,
            per_class,
            names,
            ..
        } => {
            let mut spec = SynthSpec::new(*classes, *per_class, config.seed)?;
            if !names.is_empty() {
                let names: Vec<&str> = names.iter().map(String::as_str).collect();
                spec = spec.with_names(&names)?;
            }
            let manifest = commands::synth(&spec, &config.io.dataset, cli.threads)?;
            println!(
                "wrote {} masks in {} classes to {}",
                manifest.len(),
                manifest.class_names.len(),
                config.io.dataset.display()
            );
        }
        Command::Train { .. } => {
            let report = commands::train(&config, |r| {
                println!(
                    "epoch {:>3}  lr {:.0e}  loss {:.4}  acc {:.4}  val_loss {:.4}  val_acc {:.4}",
                    r.epoch, r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc
                )
            })?;
            println!(
                "best epoch {}; test accuracy {:.4}; weights {}; history {}",
                report.history.best_epoch,
                report.test.accuracy,
                report.weights.display(),
                report.history_csv.display()
            );
        }
        Command::Eval { split, .. } => {
            let subset = match split.as_str() {
                "all" => None,
                s => Some(s.parse::<Subset>()?),
            };
            let report = commands::eval(&config, subset)?;
            print!("{}", report.to_text());
        }
        Command::Segment { frames, .. } => {
            let source = match frames {
                Some(dir) => FrameSource::directory(dir)?,
                None => FrameSource::synthetic(&config)?,
            };
            let records = commands::segment(&config, &source)?;
            let found = records.iter().filter(|r| r.found).count();
            println!("{found}/{} frames with a hand", records.len());
        }
        Command::Track { regions, .. } => {
            let (records, dims) = match regions {
                Some(path) => (commands::load_regions(path)?, (config.video.width, config.video.height)),
                None => {
                    let source = FrameSource::synthetic(&config)?;
                    let dims = source.background().dims();
                    (commands::segment(&config, &source)?, dims)
                }
            };
            let report = commands::track(&config, &records, dims)?;
            println!("{} frames tracked", report.records.len());
            if let Some(s) = report.smoothness {
                println!(
                    "raw:      rms jitter {:.3} px  max jump {:.3} px\nfiltered: rms jitter {:.3} px  max jump {:.3} px",
                    s.raw.rms_jitter, s.raw.max_jump, s.smoothed.rms_jitter, s.smoothed.max_jump
                );
            }
        }
        Command::Run { trace, .. } => {
            let (observations, dims) = match trace {
                Some(path) => (load_trace(path)?, (config.video.width, config.video.height)),
                None => {
                    let video = SyntheticVideo::new(config.video.clone())?;
                    let mut model = Classifier::load(&config.io.weights)?;
                    let obs = commands::observe(&config, &video, &mut model)?;
                    (obs, video.background().dims())
                }
            };
            let report = commands::run(&config, &observations, dims)?;
            println!(
                "{} action(s) logged to {}\n",
                report.output.log.len(),
                report.actions_path.display()
            );
            print!("{}", report.output.stats.to_table());
        }
        Command::Bench { repeats, weights, .. } => {
            let model = match weights {
                Some(p) => Classifier::load(p)?,
                None => {
                    let mut cc = ClassifierConfig::new(Arch::TinyCnn, config.classifier.n_classes);
                    cc.input_side = config.segmentation.input_side;
                    let names = (0..cc.n_classes).map(|i| format!("class{i}")).collect();
                    Classifier::new(cc, names)?
                }
            };
            let report = commands::bench(&config, &model, *repeats, cli.threads)?;
            print!("{}", report.to_text());
            let path = config.io.out_dir.join("bench.json");
            std::fs::create_dir_all(&config.io.out_dir).map_err(|e| Error::io(&config.io.out_dir, e))?;
            std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes"))
                .map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be >= 1");
        return ExitCode::from(1);
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
