//! Ad pairs, their shot segmentation and the long/short shot correspondence.

mod boundaries;
mod folds;
mod labels;
mod manifest;
mod matching;

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use boundaries::{boundaries_from_probabilities, read_probabilities, shot_count_sweep};
pub use folds::{make_folds, FoldSplit};
pub use labels::{labels_from_mapping, FrameLabels};
pub use manifest::{load_manifest, manifest_to_string, parse_manifest, save_manifest, Manifest};
pub use matching::{
    match_shots, shot_sample_frames, MatchOptions, MatchOutcome, ReviewItem, DEFAULT_REVIEW_FLOOR,
};

/// A contiguous, inclusive frame range; the atomic unit of selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub shot_id: usize,
    pub start_frame: usize,
    pub end_frame: usize,
}

impl Shot {
    pub fn frame_count(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn duration_seconds(&self, fps: f64) -> f64 {
        self.frame_count() as f64 / fps
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start_frame..=self.end_frame).contains(&frame)
    }

    /// Frame at `floor((start + end) / 2)`.
    pub fn middle_frame(&self) -> usize {
        (self.start_frame + self.end_frame) / 2
    }
}

/// Build shots from `(start, end)` pairs, numbering them in order.
pub fn shots_from_ranges(ranges: &[(usize, usize)]) -> Vec<Shot> {
    ranges
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| Shot {
            shot_id: i,
            start_frame: s,
            end_frame: e,
        })
        .collect()
}

/// Check that `shots` are numbered 0.. in order and tile `0..frame_count`.
pub fn validate_tiling(video: &str, shots: &[Shot], frame_count: usize) -> Result<()> {
    let fail = |message: String| Error::Tiling {
        video: video.to_string(),
        message,
    };
    if shots.is_empty() {
        return Err(fail("video has no shots".into()));
    }
    let mut next = 0usize;
    for (i, s) in shots.iter().enumerate() {
        if s.shot_id != i {
            return Err(fail(format!("shot {i} carries id {}", s.shot_id)));
        }
        if s.start_frame > s.end_frame {
            return Err(fail(format!(
                "shot {i} has start {} after end {}",
                s.start_frame, s.end_frame
            )));
        }
        if s.start_frame > next {
            return Err(fail(if s.start_frame == next + 1 {
                format!("shot gap at frame {next}")
            } else {
                format!("shot gap at frames {next}..{}", s.start_frame - 1)
            }));
        }
        if s.start_frame < next {
            return Err(fail(format!("shot overlap at frame {}", s.start_frame)));
        }
        next = s.end_frame + 1;
    }
    if next != frame_count {
        return Err(fail(format!(
            "shots cover {next} frames but video has {frame_count}"
        )));
    }
    Ok(())
}

/// Index of the shot containing `frame`, by binary search over a tiling.
pub fn shot_of_frame(shots: &[Shot], frame: usize) -> Option<usize> {
    let i = shots.partition_point(|s| s.end_frame < frame);
    (i < shots.len() && shots[i].contains(frame)).then_some(i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRef {
    pub video_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub file: PathBuf,
    pub fps: f64,
    pub frame_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoSide {
    pub video: VideoRef,
    pub shots: Vec<Shot>,
}

impl VideoSide {
    pub fn duration_seconds(&self) -> f64 {
        self.video.frame_count as f64 / self.video.fps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub short_shot: usize,
    pub long_shot: usize,
    pub similarity: f64,
}

/// Short shot → long shot correspondence, one entry per short shot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShotMapping {
    pub entries: Vec<MappingEntry>,
}

impl ShotMapping {
    /// Distinct long shots that appear in the short ad.
    pub fn positive_long_shots(&self) -> BTreeSet<usize> {
        self.entries.iter().map(|e| e.long_shot).collect()
    }

    pub fn validate(&self, pair_id: &str, short_shots: usize, long_shots: usize) -> Result<()> {
        let mut seen = vec![false; short_shots];
        for e in &self.entries {
            if e.short_shot >= short_shots {
                return Err(Error::UnknownShot {
                    video: format!("{pair_id} (short)"),
                    shot_id: e.short_shot,
                });
            }
            if e.long_shot >= long_shots {
                return Err(Error::UnknownShot {
                    video: format!("{pair_id} (long)"),
                    shot_id: e.long_shot,
                });
            }
            if std::mem::replace(&mut seen[e.short_shot], true) {
                return Err(Error::invalid(format!(
                    "{pair_id}: short shot {} mapped twice",
                    e.short_shot
                )));
            }
            if !(0.0..=1.0).contains(&e.similarity) {
                return Err(Error::invalid(format!(
                    "{pair_id}: similarity {} outside [0,1]",
                    e.similarity
                )));
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "{pair_id}: short shot {missing} has no mapping"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdPair {
    pub pair_id: String,
    pub long: VideoSide,
    pub short: VideoSide,
    pub mapping: Option<ShotMapping>,
}

impl AdPair {
    pub fn validate(&self) -> Result<()> {
        validate_tiling(
            &self.long.video.video_id,
            &self.long.shots,
            self.long.video.frame_count,
        )?;
        validate_tiling(
            &self.short.video.video_id,
            &self.short.shots,
            self.short.video.frame_count,
        )?;
        if let Some(m) = &self.mapping {
            m.validate(&self.pair_id, self.short.shots.len(), self.long.shots.len())?;
        }
        Ok(())
    }
}
