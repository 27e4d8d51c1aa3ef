use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use empath_core::audio::{read_wav, resample_linear};
use empath_core::features::FeatureExtractor;
use empath_core::labels::{filter_negative, Emotion, Language};
use empath_core::recommender::{load_embeddings, load_suggestions, recommend, train_rec, RecModel, DEFAULT_HIDDEN, DEFAULT_K};
use empath_core::ser::{build_ser_model, evaluate_ser, load_shemo_dir, train_ser, TrainConfig, TrainReport};
use empath_core::synth::{generated_resources, write_synthetic_ser_dataset};
use empath_service::pipeline::{load_rec, load_ser, Distribution, Pipeline, SuggestionRef};
use empath_service::{server, ServiceConfig};
use serde_json::json;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "empath", version, about = "Emotion-aware speech pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the speech emotion classifier on a directory of ShEMO-named WAVs.
    TrainSer {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Directory for cached log-mel features.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Print accuracy, per-class recall and the confusion matrix as JSON.
    EvalSer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Classify one WAV file and print the distribution and filter decision.
    AnalyzeFile {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Train the suggestion recommender over a frozen embedding table.
    TrainRec {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_HIDDEN)]
        hidden: usize,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
    },
    /// Print the top suggestions for a negative emotion as JSON.
    Recommend {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emotion: Emotion,
        #[arg(long, default_value = "en")]
        lang: Language,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a deterministic synthetic six-class WAV dataset.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_class: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Regenerate the derived files under data/ (toy corpus and embedding tables).
    GenData {
        #[arg(long, default_value = "data")]
        out: PathBuf,
        /// Defaults to `<out>/seed_corpus.jsonl`.
        #[arg(long)]
        seed_corpus: Option<PathBuf>,
    },
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse().command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn log_report(report: &TrainReport) {
    for e in &report.epochs {
        tracing::info!(epoch = e.epoch, loss = e.loss, accuracy = e.accuracy, "epoch");
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::TrainSer {
            data,
            out,
            epochs,
            seed,
            batch_size,
            lr,
            cache,
        } => {
            let mut model = build_ser_model(seed);
            let extractor = FeatureExtractor::new(model.feature_config().clone())?;
            let dataset = load_shemo_dir(&data, &extractor, cache.as_deref())?;
            tracing::info!(clips = dataset.len(), "loaded dataset");
            let config = TrainConfig {
                epochs,
                batch_size,
                learning_rate: lr,
                seed,
                shuffle: true,
            };
            let report = train_ser(&mut model, &dataset, &config)?;
            log_report(&report);
            ensure_parent(&out)?;
            model.to_checkpoint().save(&out)?;
            let last = report.last().context("no epochs were run")?;
            print_json(&json!({ "checkpoint": out, "epochs": epochs, "loss": last.loss, "accuracy": last.accuracy }))
        }
        Command::EvalSer { ckpt, data } => {
            let model = load_ser(&ckpt)?;
            let extractor = FeatureExtractor::new(model.feature_config().clone())?;
            let dataset = load_shemo_dir(&data, &extractor, None)?;
            let metrics = evaluate_ser(&model, &dataset)?;
            println!("{}", serde_json::to_string(&metrics)?);
            Ok(())
        }
        Command::AnalyzeFile { ckpt, wav, threshold } => {
            if !(0.0..=1.0).contains(&threshold) {
                bail!("threshold {threshold} outside [0, 1]");
            }
            let model = load_ser(&ckpt)?;
            let bytes = std::fs::read(&wav).with_context(|| format!("reading {}", wav.display()))?;
            let clip = read_wav(&bytes)?;
            let clip = resample_linear(&clip, model.feature_config().sample_rate)?;
            let extractor = FeatureExtractor::new(model.feature_config().clone())?;
            let dist = model.predict(&extractor.log_mel_spectrogram(&clip)?)?;
            let filtered = filter_negative(&dist, threshold);
            print_json(&json!({
                "distribution": Distribution::from(&dist),
                "top_emotion": dist.top(),
                "negative": filtered.is_some(),
                "threshold": threshold,
            }))
        }
        Command::TrainRec {
            corpus,
            embeddings,
            out,
            epochs,
            seed,
            hidden,
            batch_size,
            lr,
        } => {
            let corpus = load_suggestions(&corpus)?;
            let table = Arc::new(load_embeddings(&embeddings)?);
            let mut model = RecModel::new(table, hidden, seed);
            let config = TrainConfig {
                epochs,
                batch_size,
                learning_rate: lr,
                seed,
                shuffle: true,
            };
            let report = train_rec(&mut model, &corpus, &config)?;
            log_report(&report);
            ensure_parent(&out)?;
            model.to_checkpoint().save(&out)?;
            let last = report.last().context("no epochs were run")?;
            print_json(&json!({ "checkpoint": out, "epochs": epochs, "loss": last.loss, "accuracy": last.accuracy }))
        }
        Command::Recommend {
            ckpt,
            corpus,
            emotion,
            lang,
            k,
        } => {
            let model = load_rec(&ckpt)?;
            let corpus = load_suggestions(&corpus)?;
            let rec = recommend(&corpus, &model, emotion, lang, k)?;
            let suggestions: Vec<SuggestionRef> = rec
                .suggestions
                .into_iter()
                .map(|s| SuggestionRef { id: s.id, text: s.text })
                .collect();
            print_json(&json!({ "suggestions": suggestions, "truncated": rec.truncated }))
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config).map_err(|e| anyhow::anyhow!("startup failed at config: {e}"))?;
            let ip: IpAddr = config
                .bind
                .parse()
                .map_err(|e| anyhow::anyhow!("startup failed at config: bind address {:?}: {e}", config.bind))?;
            let pipeline = Pipeline::from_config(&config)?;
            tracing::info!(health = ?pipeline.health(), "models loaded");
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(server::serve(pipeline, SocketAddr::new(ip, config.port)))
        }
        Command::GenSynthetic { out, per_class, seed } => {
            let paths = write_synthetic_ser_dataset(&out, per_class, seed)?;
            print_json(&json!({ "dir": out, "clips": paths.len() }))
        }
        Command::GenData { out, seed_corpus } => {
            let seed_path = seed_corpus.unwrap_or_else(|| out.join("seed_corpus.jsonl"));
            let seed = load_suggestions(&seed_path)?;
            std::fs::create_dir_all(&out)?;
            let mut written = Vec::new();
            for (name, contents) in generated_resources(&seed) {
                let path = out.join(name);
                std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
                written.push(path);
            }
            print_json(&json!({ "written": written }))
        }
    }
}
