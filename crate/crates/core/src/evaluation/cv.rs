use serde::{Deserialize, Serialize};

use super::{evaluate_video, mean_of_means, summarize, MetricMeans, UndefinedCounts, VideoMetrics, KENDALL_VARIANT};
use crate::dataset::{AdPair, FoldSplit, FrameLabels};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::model::{
    train, AdSumModel, AttentionBackbone, AttentionScorerConfig, FusionConfig, TrainConfig, TrainingVideo,
};
use crate::selection::{aggregate_shot_scores, select_shots};

/// One pair ready for training or evaluation.
#[derive(Debug, Clone)]
pub struct CvVideo {
    pub pair: AdPair,
    pub visual: Option<FeatureMap>,
    pub audio: Option<FeatureMap>,
    pub labels: FrameLabels,
    pub stride: usize,
}

impl CvVideo {
    pub fn training_video(&self) -> TrainingVideo {
        let n = self.labels.labels.len();
        let focal: Vec<usize> = (0..n).step_by(self.stride.max(1)).collect();
        TrainingVideo {
            video_id: self.pair.pair_id.clone(),
            visual: self.visual.clone(),
            audio: self.audio.clone(),
            labels: self.labels.at_frames(&focal),
        }
    }

    /// Predict, expand to frames, select shots and score everything.
    pub fn evaluate(&self, model: &AdSumModel, budget_seconds: f64, positional: bool) -> Result<VideoMetrics> {
        let clip = model.predict(self.visual.as_ref(), self.audio.as_ref())?;
        let long = &self.pair.long;
        let frames = clip.expand(long.video.frame_count, self.stride)?;
        let shot_scores = aggregate_shot_scores(&frames, &long.shots, long.video.fps)?;
        let selection = select_shots(&shot_scores, budget_seconds)?;
        evaluate_video(
            &self.pair.pair_id,
            &frames,
            &self.labels,
            &long.shots,
            self.pair.mapping.as_ref().map(|m| (&selection, m)),
            positional,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub budget_seconds: f64,
    pub positional: bool,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_pairs: Vec<String>,
    pub final_train_loss: Option<f64>,
    pub videos: Vec<VideoMetrics>,
    pub means: MetricMeans,
    pub undefined: UndefinedCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fingerprint: String,
    pub kendall_variant: String,
    pub folds: Vec<FoldReport>,
    /// Mean of the fold means.
    pub grand_mean: MetricMeans,
}

/// Train on all folds but one, evaluate per video on the held-out fold, for
/// each fold in turn. Folds run sequentially so the result depends only on
/// the inputs and seeds.
pub fn run_cross_validation(
    videos: &[CvVideo],
    folds: &FoldSplit,
    scorer_cfg: &AttentionScorerConfig,
    backbone: AttentionBackbone,
    fusion: FusionConfig,
    tc: &TrainConfig,
    opts: &CvOptions,
) -> Result<CvReport> {
    let ids: Vec<&str> = videos.iter().map(|v| v.pair.pair_id.as_str()).collect();
    folds.validate_for(&ids)?;
    let by_id = |id: &str| {
        videos
            .iter()
            .find(|v| v.pair.pair_id == id)
            .ok_or_else(|| Error::invalid(format!("fold references unknown pair {id}")))
    };
    let mut reports = Vec::with_capacity(folds.k());
    for (k, test) in folds.folds.iter().enumerate() {
        let train_set: Vec<TrainingVideo> = folds
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter())
            .map(|id| by_id(id).map(CvVideo::training_video))
            .collect::<Result<_>>()?;
        let (model, report) = train(&train_set, scorer_cfg, backbone.clone(), fusion, tc)?;
        let metrics = test
            .iter()
            .map(|id| by_id(id)?.evaluate(&model, opts.budget_seconds, opts.positional))
            .collect::<Result<Vec<_>>>()?;
        let (means, undefined) = summarize(&metrics);
        log::info!("fold {k}: {} test pairs, mean AP {:?}", test.len(), means.ap);
        reports.push(FoldReport {
            fold: k,
            test_pairs: test.clone(),
            final_train_loss: report.final_loss(),
            videos: metrics,
            means,
            undefined,
        });
    }
    let grand_mean = mean_of_means(&reports.iter().map(|r| r.means).collect::<Vec<_>>());
    Ok(CvReport {
        fingerprint: opts.fingerprint.clone(),
        kendall_variant: KENDALL_VARIANT.into(),
        folds: reports,
        grand_mean,
    })
}
