use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adsum_core::config::{RunConfig, CACHE_DIR_ENV};
use adsum_core::dataset::{load_manifest, FoldSplit, Manifest};
use adsum_core::io::{read_json, write_json};
use adsum_core::model::{Checkpoint, FusionMode, LossKind};
use adsum_core::pipeline;
use adsum_core::synth::{write_fixture_set, SynthConfig};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

/// Cut 30-second ads down to 15 seconds by scoring and selecting shots.
#[derive(Parser, Debug)]
#[command(name = "adsum", version)]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[arg(long, global = true, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    visual_backend: Option<String>,
    #[arg(long, global = true)]
    audio_backend: Option<String>,
    #[arg(long, global = true)]
    stride: Option<usize>,
    #[arg(long, global = true)]
    hws: Option<usize>,
    #[arg(long, global = true)]
    normalize_features: Option<bool>,
    #[arg(long, global = true, value_parser = parse_fusion)]
    fusion: Option<FusionMode>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    attention_backbone: Option<String>,
    #[arg(long, global = true)]
    train_attention: Option<bool>,
    #[arg(long, global = true, value_parser = parse_loss)]
    loss: Option<LossKind>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    budget: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Boundary thresholds; more than one writes one manifest per threshold.
    #[arg(long, global = true, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, global = true)]
    collapse_runs: Option<bool>,
    #[arg(long, global = true)]
    review_floor: Option<f64>,
    #[arg(long, global = true)]
    target_fps: Option<f64>,
    /// Worker threads for per-video work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

fn parse_fusion(s: &str) -> Result<FusionMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown fusion mode {s:?} (visual_only, audio_only, early, late)"))
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown loss {s:?} (bce, mse)"))
}

macro_rules! apply {
    ($cfg:ident, $o:ident, $($field:ident => $target:ident),* $(,)?) => {
        $(if let Some(v) = $o.$field.clone() { $cfg.$target = v; })*
    };
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        let o = self;
        apply!(cfg, o,
            manifest => manifest, cache_dir => cache_dir, output_dir => output_dir,
            visual_backend => visual_backend, audio_backend => audio_backend,
            stride => stride, hws => hws, normalize_features => normalize_features,
            fusion => fusion, alpha => alpha, beta => beta,
            attention_backbone => attention_backbone, train_attention => train_attention,
            loss => loss, epochs => epochs, batch_size => batch_size, learning_rate => learning_rate,
            budget => budget_seconds, seed => seed, folds => folds, thresholds => thresholds,
            collapse_runs => collapse_runs, review_floor => review_floor, target_fps => target_fps,
            jobs => jobs,
        );
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic fixture set (videos, boundary files, pairs.json).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        fixture_seed: u64,
        #[arg(long)]
        no_audio: bool,
    },
    /// Shots, shot matching and folds from a pairs.json input list.
    BuildDataset {
        #[arg(long)]
        inputs: PathBuf,
        /// Directory for the manifest(s), review.json and folds.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill the feature cache for every long video in the manifest.
    Extract,
    /// Train a model and write its checkpoint.
    Train {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Leave this fold out of training.
        #[arg(long)]
        holdout_fold: Option<usize>,
        #[arg(long)]
        folds_file: Option<PathBuf>,
    },
    /// Write per-frame importance scores for each long video.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Restrict to these pairs.
        #[arg(long = "pair")]
        pairs: Vec<String>,
    },
    /// Select shots within the budget and write cut lists.
    Clip {
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also assemble the output videos.
        #[arg(long)]
        render: bool,
        #[arg(long, default_value = "ffmpeg")]
        ffmpeg: String,
    },
    /// Metric report from score files, or k-fold cross-validation with --cv.
    Evaluate {
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        cv: bool,
        #[arg(long)]
        folds_file: Option<PathBuf>,
        /// Add first-half / second-half breakdowns.
        #[arg(long)]
        positional: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn manifest(cfg: &RunConfig) -> Result<Manifest> {
    load_manifest(&cfg.manifest).with_context(|| format!("loading manifest {}", cfg.manifest.display()))
}

fn folds(path: Option<&Path>) -> Result<Option<FoldSplit>> {
    path.map(|p| read_json(p).with_context(|| format!("loading folds {}", p.display())))
        .transpose()
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Synth { out, pairs, fixture_seed, no_audio } => {
            let sc = SynthConfig {
                with_audio: !no_audio,
                budget_seconds: cfg.budget_seconds,
                ..Default::default()
            };
            write_fixture_set(&out, pairs, &sc, fixture_seed)?;
            println!("wrote {pairs} pairs to {}", out.display());
        }
        Command::BuildDataset { inputs, out } => {
            let b = pipeline::build_dataset(&inputs, &out, &cfg)?;
            for (t, p) in &b.manifests {
                println!("threshold {t}: {}", p.display());
            }
            println!("{} shots flagged for review in {}", b.review_items, b.review.display());
        }
        Command::Extract => {
            let s = pipeline::extract(&manifest(&cfg)?, &cfg)?;
            println!("computed {}, cached {}", s.computed, s.cached);
            for v in s.silent_videos {
                log::warn!("{v}: no audio track, silence substituted");
            }
        }
        Command::Train { checkpoint, holdout_fold, folds_file } => {
            let m = manifest(&cfg)?;
            let f = match (holdout_fold, folds(folds_file.as_deref())?) {
                (None, _) => None,
                (Some(k), Some(f)) => Some((f, k)),
                (Some(k), None) => Some((adsum_core::dataset::make_folds(&m.pairs, cfg.folds, cfg.seed)?, k)),
            };
            let ckpt = pipeline::train_checkpoint(&m, &cfg, f.as_ref().map(|(f, k)| (f, *k)))?;
            let path = checkpoint.unwrap_or_else(|| out.join("checkpoint.json"));
            ckpt.save(&path)?;
            println!(
                "final loss {:.6} after {} steps: {}",
                ckpt.report.final_loss().unwrap_or(f64::NAN),
                ckpt.report.steps,
                path.display()
            );
        }
        Command::Predict { checkpoint, scores, pairs } => {
            let ckpt = Checkpoint::load(&checkpoint.unwrap_or_else(|| out.join("checkpoint.json")))?;
            let dir = scores.unwrap_or_else(|| out.join("scores"));
            let files = pipeline::predict(&manifest(&cfg)?, &cfg, &ckpt, &pairs, &dir)?;
            println!("wrote {} score files to {}", files.len(), dir.display());
        }
        Command::Clip { scores, out: clip_out, render, ffmpeg } => {
            let scores = scores.unwrap_or_else(|| out.join("scores"));
            let dir = clip_out.unwrap_or_else(|| out.join("clips"));
            let c = pipeline::clip(&manifest(&cfg)?, &cfg, &scores, &dir, render.then_some(ffmpeg.as_str()))?;
            println!("wrote {} cut lists and {} videos to {}", c.cut_lists.len(), c.videos.len(), dir.display());
        }
        Command::Evaluate { scores, cv, folds_file, positional, report } => {
            let m = manifest(&cfg)?;
            if cv {
                let f = folds(folds_file.as_deref())?;
                let r = pipeline::cross_validate(&m, &cfg, f.as_ref(), positional)?;
                let path = report.unwrap_or_else(|| out.join("cv_report.json"));
                write_json(&path, &r)?;
                print_means("grand mean", &r.grand_mean);
                println!("{}", path.display());
            } else {
                let scores = scores.unwrap_or_else(|| out.join("scores"));
                let r = pipeline::evaluate(&m, &cfg, &scores, positional)?;
                let path = report.unwrap_or_else(|| out.join("report.json"));
                write_json(&path, &r)?;
                print_means("mean", &r.means);
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn print_means(label: &str, m: &adsum_core::evaluation::MetricMeans) {
    let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "{label}: AP {} AUROC {} rho {} tau {} P {} R {} F1 {}",
        f(m.ap),
        f(m.auroc),
        f(m.spearman),
        f(m.kendall),
        f(m.precision),
        f(m.recall),
        f(m.f1)
    );
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let missing = err
        .chain()
        .filter_map(|e| e.downcast_ref::<adsum_core::Error>())
        .any(|e| e.is_missing_dependency());
    if missing {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
