//! Frame-level metrics, shot-level retrieval metrics and the k-fold harness.

mod cv;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::dataset::{FrameLabels, Shot, ShotMapping};
use crate::error::Result;
use crate::selection::SelectionResult;

pub use cv::{run_cross_validation, CvOptions, CvReport, CvVideo, FoldReport};
pub use metrics::{auroc, average_precision, average_ranks, kendall, spearman};

pub const KENDALL_VARIANT: &str = "tau-b";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRetrieval {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Selected shots against the distinct mapped long shots. Empty
/// denominators give 0.
pub fn shot_retrieval_metrics(selected: &SelectionResult, mapping: &ShotMapping) -> ShotRetrieval {
    let positives = mapping.positive_long_shots();
    let sel: std::collections::BTreeSet<usize> = selected.selected_shot_ids.iter().copied().collect();
    let tp = sel.intersection(&positives).count();
    let fp = sel.len() - tp;
    let fn_ = positives.len() - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ShotRetrieval {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub ap: Option<f64>,
    pub auroc: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
}

pub fn frame_metrics(frame_scores: &[f64], labels: &[f64]) -> Result<FrameMetrics> {
    Ok(FrameMetrics {
        ap: average_precision(frame_scores, labels)?,
        auroc: auroc(frame_scores, labels)?,
        spearman: spearman(frame_scores, labels)?,
        kendall: kendall(frame_scores, labels)?,
    })
}

/// Frame metrics restricted to shots starting in the first / second half of
/// the video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionalMetrics {
    pub first_half: FrameMetrics,
    pub second_half: FrameMetrics,
}

pub fn positional_metrics(frame_scores: &[f64], labels: &[f64], shots: &[Shot]) -> Result<PositionalMetrics> {
    let half = frame_scores.len() as f64 / 2.0;
    let (mut s1, mut l1, mut s2, mut l2) = (vec![], vec![], vec![], vec![]);
    for s in shots {
        let (sv, lv) = if (s.start_frame as f64) < half {
            (&mut s1, &mut l1)
        } else {
            (&mut s2, &mut l2)
        };
        sv.extend_from_slice(&frame_scores[s.start_frame..=s.end_frame]);
        lv.extend_from_slice(&labels[s.start_frame..=s.end_frame]);
    }
    Ok(PositionalMetrics {
        first_half: frame_metrics(&s1, &l1)?,
        second_half: frame_metrics(&s2, &l2)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub pair_id: String,
    #[serde(flatten)]
    pub frame: FrameMetrics,
    pub shot: Option<ShotRetrieval>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub positional: Option<PositionalMetrics>,
}

/// Scores one video from its frame-expanded scores.
pub fn evaluate_video(
    pair_id: &str,
    frame_scores: &[f64],
    labels: &FrameLabels,
    shots: &[Shot],
    selection: Option<(&SelectionResult, &ShotMapping)>,
    positional: bool,
) -> Result<VideoMetrics> {
    let l = labels.as_f64();
    Ok(VideoMetrics {
        pair_id: pair_id.to_string(),
        frame: frame_metrics(frame_scores, &l)?,
        shot: selection.map(|(s, m)| shot_retrieval_metrics(s, m)),
        positional: if positional {
            Some(positional_metrics(frame_scores, &l, shots)?)
        } else {
            None
        },
    })
}

/// Means over videos with a defined value, and how many were excluded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub ap: Option<f64>,
    pub auroc: Option<f64>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UndefinedCounts {
    pub ap: usize,
    pub auroc: usize,
    pub spearman: usize,
    pub kendall: usize,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let (mut sum, mut n, mut undefined) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                n += 1;
            }
            None => undefined += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), undefined)
}

pub fn summarize(videos: &[VideoMetrics]) -> (MetricMeans, UndefinedCounts) {
    let (ap, u_ap) = mean_defined(videos.iter().map(|v| v.frame.ap));
    let (auroc, u_auroc) = mean_defined(videos.iter().map(|v| v.frame.auroc));
    let (spearman, u_sp) = mean_defined(videos.iter().map(|v| v.frame.spearman));
    let (kendall, u_k) = mean_defined(videos.iter().map(|v| v.frame.kendall));
    let shot = |f: fn(&ShotRetrieval) -> f64| {
        mean_defined(videos.iter().filter_map(|v| v.shot.as_ref()).map(|s| Some(f(s)))).0
    };
    (
        MetricMeans {
            ap,
            auroc,
            spearman,
            kendall,
            precision: shot(|s| s.precision),
            recall: shot(|s| s.recall),
            f1: shot(|s| s.f1),
        },
        UndefinedCounts {
            ap: u_ap,
            auroc: u_auroc,
            spearman: u_sp,
            kendall: u_k,
        },
    )
}

/// Field-wise mean of defined fold means.
pub fn mean_of_means(folds: &[MetricMeans]) -> MetricMeans {
    let m = |f: fn(&MetricMeans) -> Option<f64>| mean_defined(folds.iter().map(f)).0;
    MetricMeans {
        ap: m(|x| x.ap),
        auroc: m(|x| x.auroc),
        spearman: m(|x| x.spearman),
        kendall: m(|x| x.kendall),
        precision: m(|x| x.precision),
        recall: m(|x| x.recall),
        f1: m(|x| x.f1),
    }
}

/// Metric report for a single (non cross-validated) evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub kendall_variant: String,
    pub videos: Vec<VideoMetrics>,
    pub means: MetricMeans,
    pub undefined: UndefinedCounts,
}

impl EvalReport {
    pub fn new(fingerprint: &str, videos: Vec<VideoMetrics>) -> Self {
        let (means, undefined) = summarize(&videos);
        Self {
            fingerprint: fingerprint.to_string(),
            kendall_variant: KENDALL_VARIANT.into(),
            videos,
            means,
            undefined,
        }
    }
}
