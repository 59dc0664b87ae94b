//! The end-to-end stages behind the command-line tool: build a manifest,
//! extract features, train, predict, clip and evaluate.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{
    boundaries_from_probabilities, labels_from_mapping, make_folds, match_shots, read_probabilities,
    save_manifest, AdPair, FoldSplit, Manifest, MatchOptions, ReviewItem, VideoRef, VideoSide,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_video, run_cross_validation, CvOptions, CvReport, CvVideo, EvalReport};
use crate::features::{
    create_audio_backend, create_visual_backend, embed_audio, embed_visual, CacheKey, CacheLookup,
    FeatureCache, FeatureMap, Stream,
};
use crate::io::{read_json, write_json};
use crate::media::{resample_probabilities, FrameSource, Video};
use crate::model::{train, AttentionBackbone, Checkpoint};
use crate::sampling::{clips_for_video, ClipSet};
use crate::selection::{aggregate_shot_scores, assemble, emit_cut_list, select_shots, CutList};
use crate::synth::RawPairInput;

/// Run `f` on a pool of `jobs` threads. Results never depend on `jobs`.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Decode a video and bring it to the frame rate recorded in the manifest.
pub fn open_video(path: &Path, fps: f64) -> Result<Video> {
    let v = Video::open(path)?;
    Ok(if (v.info().fps - fps).abs() > 1e-9 {
        v.resample_fps(fps)
    } else {
        v
    })
}

fn resolve(base: &Path, p: &Path) -> Result<PathBuf> {
    let full = base.join(p);
    std::fs::canonicalize(&full).map_err(|_| Error::MissingFile(full))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub threshold: f64,
    pub pair_id: String,
    #[serde(flatten)]
    pub item: ReviewItem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutputs {
    pub manifests: Vec<(f64, PathBuf)>,
    pub review: PathBuf,
    pub folds: PathBuf,
    pub review_items: usize,
}

pub fn manifest_name(threshold: f64, sweep: bool) -> String {
    if sweep {
        format!("manifest.t{threshold}.json")
    } else {
        "manifest.json".into()
    }
}

struct SideInput {
    video: Video,
    probs: Vec<f64>,
    vref: VideoRef,
}

fn load_side(raw: &crate::synth::RawVideoInput, base: &Path, standardize: Option<f64>) -> Result<SideInput> {
    let file = resolve(base, &raw.file)?;
    let probs_path = resolve(base, &raw.boundaries)?;
    let mut video = Video::open(&file)?;
    let mut probs = read_probabilities(&probs_path)?;
    let info = video.info();
    if probs.len() != info.frame_count {
        return Err(Error::parse(
            probs_path.display().to_string(),
            format!("{} probabilities for {} frames", probs.len(), info.frame_count),
        ));
    }
    if let Some(fps) = standardize.filter(|f| (f - info.fps).abs() > 1e-9) {
        probs = resample_probabilities(&probs, info.fps, fps);
        video = video.resample_fps(fps);
    }
    let info = video.info();
    Ok(SideInput {
        vref: VideoRef {
            video_id: raw.video_id.clone(),
            file,
            fps: info.fps,
            frame_count: info.frame_count,
        },
        video,
        probs,
    })
}

/// Shot boundaries, shot matching and folds for every input pair, for each
/// configured threshold. Nothing is written unless every pair succeeds.
pub fn build_dataset(inputs: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<BuildOutputs> {
    cfg.validate()?;
    let raw: Vec<RawPairInput> = read_json(inputs)?;
    let base = inputs.parent().unwrap_or(Path::new("."));
    let opts = MatchOptions {
        review_floor: cfg.review_floor,
        ..Default::default()
    };
    let per_pair: Vec<Vec<(AdPair, Vec<ReviewItem>)>> = with_jobs(cfg.jobs, || {
        raw.par_iter()
            .map(|r| {
                let long = load_side(&r.long, base, Some(cfg.target_fps))?;
                let short = load_side(&r.short, base, None)?;
                cfg.thresholds
                    .iter()
                    .map(|&t| {
                        let side = |s: &SideInput| -> Result<VideoSide> {
                            Ok(VideoSide {
                                video: s.vref.clone(),
                                shots: boundaries_from_probabilities(&s.probs, t, cfg.collapse_runs)?,
                            })
                        };
                        let (ls, ss) = (side(&long)?, side(&short)?);
                        let outcome = match_shots(&ss, &ls, &short.video, &long.video, &opts)?;
                        let pair = AdPair {
                            pair_id: r.pair_id.clone(),
                            long: ls,
                            short: ss,
                            mapping: Some(outcome.mapping),
                        };
                        pair.validate()?;
                        Ok((pair, outcome.review))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let sweep = cfg.thresholds.len() > 1;
    let mut manifests = Vec::new();
    let mut review = Vec::new();
    for (ti, &t) in cfg.thresholds.iter().enumerate() {
        let pairs: Vec<AdPair> = per_pair.iter().map(|p| p[ti].0.clone()).collect();
        for p in &per_pair {
            review.extend(p[ti].1.iter().map(|item| ReviewRecord {
                threshold: t,
                pair_id: p[ti].0.pair_id.clone(),
                item: item.clone(),
            }));
        }
        manifests.push((t, pairs));
    }
    let folds = make_folds(&manifests[0].1, cfg.folds, cfg.seed)?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (t, pairs) in &manifests {
        let path = out_dir.join(manifest_name(*t, sweep));
        save_manifest(&path, pairs)?;
        written.push((*t, path));
    }
    let review_path = out_dir.join("review.json");
    write_json(&review_path, &review)?;
    let folds_path = out_dir.join("folds.json");
    write_json(&folds_path, &folds)?;
    Ok(BuildOutputs {
        manifests: written,
        review: review_path,
        folds: folds_path,
        review_items: review.len(),
    })
}

fn clip_set(pair: &AdPair, cfg: &RunConfig) -> Result<ClipSet> {
    let v = &pair.long.video;
    clips_for_video(&v.video_id, &pair.long.shots, v.frame_count, v.fps, cfg.stride, cfg.hws)
}

fn backend_for(stream: Stream, cfg: &RunConfig) -> &str {
    match stream {
        Stream::Visual => &cfg.visual_backend,
        Stream::Audio => &cfg.audio_backend,
    }
}

/// Streams the configured fusion mode consumes.
pub fn needed_streams(cfg: &RunConfig) -> Vec<Stream> {
    let mut s = Vec::new();
    if cfg.fusion.uses_visual() {
        s.push(Stream::Visual);
    }
    if cfg.fusion.uses_audio() {
        s.push(Stream::Audio);
    }
    s
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureOutcome {
    pub visual: Option<FeatureMap>,
    pub audio: Option<FeatureMap>,
    pub computed: usize,
    pub cached: usize,
    pub silent: bool,
}

/// Feature maps of the long video for every needed stream, from the cache or
/// computed and stored.
pub fn long_features(manifest: &Manifest, pair: &AdPair, cfg: &RunConfig, cache: &FeatureCache) -> Result<FeatureOutcome> {
    let clips = clip_set(pair, cfg)?;
    let vref = &pair.long.video;
    let mut video: Option<Video> = None;
    let mut out = FeatureOutcome::default();
    for stream in needed_streams(cfg) {
        let backend = backend_for(stream, cfg);
        let key = CacheKey::new(&vref.video_id, backend, cfg.stride, cfg.hws);
        let fm = match cache.get(&key)? {
            CacheLookup::Hit(fm) if fm.num_clips == clips.len() && fm.stream == stream => {
                out.cached += 1;
                fm
            }
            _ => {
                if video.is_none() {
                    video = Some(open_video(&manifest.video_path(vref), vref.fps)?);
                }
                let v = video.as_ref().unwrap();
                if v.info().frame_count != vref.frame_count {
                    return Err(Error::invalid(format!(
                        "{}: decoded {} frames, manifest says {}",
                        vref.video_id,
                        v.info().frame_count,
                        vref.frame_count
                    )));
                }
                let fm = match stream {
                    Stream::Visual => embed_visual(&clips, v, &mut create_visual_backend(backend)?)?,
                    Stream::Audio => {
                        let e = embed_audio(&clips, v.audio(), create_audio_backend(backend)?.as_mut())?;
                        out.silent |= e.substituted_silence;
                        e.features
                    }
                };
                cache.put(&key, &fm)?;
                out.computed += 1;
                fm
            }
        };
        let fm = if cfg.normalize_features { fm.zscored() } else { fm };
        match stream {
            Stream::Visual => out.visual = Some(fm),
            Stream::Audio => out.audio = Some(fm),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractSummary {
    pub computed: usize,
    pub cached: usize,
    pub silent_videos: Vec<String>,
}

pub fn extract(manifest: &Manifest, cfg: &RunConfig) -> Result<ExtractSummary> {
    cfg.validate()?;
    let cache = FeatureCache::open(&cfg.cache_dir)?;
    let outcomes = with_jobs(cfg.jobs, || {
        manifest
            .pairs
            .par_iter()
            .map(|p| long_features(manifest, p, cfg, &cache).map(|o| (p.long.video.video_id.clone(), o)))
            .collect::<Result<Vec<_>>>()
    })??;
    let mut s = ExtractSummary::default();
    for (id, o) in outcomes {
        s.computed += o.computed;
        s.cached += o.cached;
        if o.silent {
            s.silent_videos.push(id);
        }
    }
    Ok(s)
}

/// Labelled training/evaluation inputs for the given pairs.
pub fn cv_videos(manifest: &Manifest, pairs: &[&AdPair], cfg: &RunConfig) -> Result<Vec<CvVideo>> {
    let cache = FeatureCache::open(&cfg.cache_dir)?;
    with_jobs(cfg.jobs, || {
        pairs
            .par_iter()
            .map(|&p| {
                let f = long_features(manifest, p, cfg, &cache)?;
                Ok(CvVideo {
                    pair: p.clone(),
                    visual: f.visual,
                    audio: f.audio,
                    labels: labels_from_mapping(p)?,
                    stride: cfg.stride,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Pairs to train on: all, or all outside fold `holdout`.
pub fn training_pairs<'a>(manifest: &'a Manifest, holdout: Option<(&FoldSplit, usize)>) -> Result<Vec<&'a AdPair>> {
    match holdout {
        None => Ok(manifest.pairs.iter().collect()),
        Some((folds, k)) => {
            folds.validate_for(&manifest.pairs.iter().map(|p| p.pair_id.as_str()).collect::<Vec<_>>())?;
            let test = folds
                .folds
                .get(k)
                .ok_or_else(|| Error::invalid(format!("fold {k} does not exist")))?;
            Ok(manifest.pairs.iter().filter(|p| !test.contains(&p.pair_id)).collect())
        }
    }
}

pub fn train_checkpoint(manifest: &Manifest, cfg: &RunConfig, holdout: Option<(&FoldSplit, usize)>) -> Result<Checkpoint> {
    cfg.validate()?;
    let backbone = AttentionBackbone::from_id(&cfg.attention_backbone)?;
    let pairs = training_pairs(manifest, holdout)?;
    let videos: Vec<_> = cv_videos(manifest, &pairs, cfg)?
        .iter()
        .map(CvVideo::training_video)
        .collect();
    let tc = cfg.train_config();
    let (model, report) = train(&videos, &cfg.scorer_config(), backbone, cfg.fusion_config(), &tc)?;
    Ok(Checkpoint {
        fingerprint: cfg.fingerprint(),
        train_config: tc,
        model,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreFile {
    pub pair_id: String,
    pub video_id: String,
    pub fingerprint: String,
    pub stride: usize,
    pub frame_count: usize,
    pub clip_scores: Vec<f64>,
    pub frame_scores: Vec<f64>,
}

pub fn score_path(dir: &Path, pair_id: &str) -> PathBuf {
    dir.join(format!("{pair_id}.scores.json"))
}

/// Score the long video of every pair (or of `only`) and write one score
/// file per pair.
pub fn predict(
    manifest: &Manifest,
    cfg: &RunConfig,
    checkpoint: &Checkpoint,
    only: &[String],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let fp = cfg.fingerprint();
    checkpoint.ensure_fingerprint(&fp)?;
    let pairs: Vec<&AdPair> = manifest
        .pairs
        .iter()
        .filter(|p| only.is_empty() || only.contains(&p.pair_id))
        .collect();
    if let Some(missing) = only.iter().find(|id| manifest.pair(id).is_none()) {
        return Err(Error::invalid(format!("pair {missing} is not in the manifest")));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let cache = FeatureCache::open(&cfg.cache_dir)?;
    with_jobs(cfg.jobs, || {
        pairs
            .par_iter()
            .map(|&p| {
                let f = long_features(manifest, p, cfg, &cache)?;
                let clip = checkpoint.model.predict(f.visual.as_ref(), f.audio.as_ref())?;
                let v = &p.long.video;
                let file = ScoreFile {
                    pair_id: p.pair_id.clone(),
                    video_id: v.video_id.clone(),
                    fingerprint: fp.clone(),
                    stride: cfg.stride,
                    frame_count: v.frame_count,
                    frame_scores: clip.expand(v.frame_count, cfg.stride)?,
                    clip_scores: clip.scores,
                };
                let path = score_path(out_dir, &p.pair_id);
                write_json(&path, &file)?;
                Ok(path)
            })
            .collect::<Result<Vec<_>>>()
    })?
}

fn read_scores(dir: &Path, pair: &AdPair) -> Result<ScoreFile> {
    let path = score_path(dir, &pair.pair_id);
    if !path.exists() {
        return Err(Error::MissingFile(path));
    }
    let s: ScoreFile = read_json(&path)?;
    if s.frame_count != pair.long.video.frame_count || s.frame_scores.len() != s.frame_count {
        return Err(Error::parse(
            path.display().to_string(),
            "score file does not match the manifest's frame count",
        ));
    }
    Ok(s)
}

pub fn cut_list_path(dir: &Path, pair_id: &str) -> PathBuf {
    dir.join(format!("{pair_id}.cutlist.json"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipOutputs {
    pub cut_lists: Vec<PathBuf>,
    pub videos: Vec<PathBuf>,
}

/// Select shots from the score files and write cut lists; with `ffmpeg`,
/// also render each one. Cut lists are written before any rendering starts.
pub fn clip(
    manifest: &Manifest,
    cfg: &RunConfig,
    scores_dir: &Path,
    out_dir: &Path,
    ffmpeg: Option<&str>,
) -> Result<ClipOutputs> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut cuts = Vec::new();
    for pair in &manifest.pairs {
        let s = read_scores(scores_dir, pair)?;
        let shot_scores = aggregate_shot_scores(&s.frame_scores, &pair.long.shots, pair.long.video.fps)?;
        let sel = select_shots(&shot_scores, cfg.budget_seconds)?;
        let mut cut = emit_cut_list(&sel, pair)?;
        cut.fingerprint = Some(s.fingerprint.clone());
        let path = cut_list_path(out_dir, &pair.pair_id);
        cut.save(&path)?;
        cuts.push((pair, cut, path));
    }
    let mut videos = Vec::new();
    if let Some(ffmpeg) = ffmpeg {
        for (pair, cut, _) in &cuts {
            videos.push(render(manifest, pair, cut, out_dir, ffmpeg)?);
        }
    }
    Ok(ClipOutputs {
        cut_lists: cuts.into_iter().map(|(_, _, p)| p).collect(),
        videos,
    })
}

/// Our own `.rav` container is spliced in-process; anything else goes to
/// ffmpeg.
fn render(manifest: &Manifest, pair: &AdPair, cut: &CutList, out_dir: &Path, ffmpeg: &str) -> Result<PathBuf> {
    let src = manifest.video_path(&pair.long.video);
    if src.extension().and_then(|e| e.to_str()) == Some("rav") {
        let video = open_video(&src, pair.long.video.fps)?;
        let out = out_dir.join(format!("{}.rav", pair.pair_id));
        crate::selection::splice(&video, cut)?.write_rav(&out)?;
        return Ok(out);
    }
    let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("mp4");
    let out = out_dir.join(format!("{}.{ext}", pair.pair_id));
    assemble(cut, &src, &out, ffmpeg, true)
}

pub fn evaluate(manifest: &Manifest, cfg: &RunConfig, scores_dir: &Path, positional: bool) -> Result<EvalReport> {
    cfg.validate()?;
    let videos = manifest
        .pairs
        .iter()
        .map(|pair| {
            let s = read_scores(scores_dir, pair)?;
            let labels = labels_from_mapping(pair)?;
            let long = &pair.long;
            let ss = aggregate_shot_scores(&s.frame_scores, &long.shots, long.video.fps)?;
            let sel = select_shots(&ss, cfg.budget_seconds)?;
            evaluate_video(
                &pair.pair_id,
                &s.frame_scores,
                &labels,
                &long.shots,
                pair.mapping.as_ref().map(|m| (&sel, m)),
                positional,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(&cfg.fingerprint(), videos))
}

pub fn cross_validate(manifest: &Manifest, cfg: &RunConfig, folds: Option<&FoldSplit>, positional: bool) -> Result<CvReport> {
    cfg.validate()?;
    let made;
    let folds = match folds {
        Some(f) => f,
        None => {
            made = make_folds(&manifest.pairs, cfg.folds, cfg.seed)?;
            &made
        }
    };
    let backbone = AttentionBackbone::from_id(&cfg.attention_backbone)?;
    let pairs: Vec<&AdPair> = manifest.pairs.iter().collect();
    let videos = cv_videos(manifest, &pairs, cfg)?;
    run_cross_validation(
        &videos,
        folds,
        &cfg.scorer_config(),
        backbone,
        cfg.fusion_config(),
        &cfg.train_config(),
        &CvOptions {
            budget_seconds: cfg.budget_seconds,
            positional,
            fingerprint: cfg.fingerprint(),
        },
    )
}
