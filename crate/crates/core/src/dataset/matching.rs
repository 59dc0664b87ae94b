use serde::{Deserialize, Serialize};

use super::{MappingEntry, Shot, ShotMapping, VideoSide};
use crate::error::{Error, Result};
use crate::keypoints::{detect_and_describe, similarity, FrameFeatures, SiftParams};
use crate::media::FrameSource;

/// Matches below this similarity go to the manual review report.
pub const DEFAULT_REVIEW_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub sift: SiftParams,
    pub ratio: f32,
    pub review_floor: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            sift: SiftParams::default(),
            ratio: 0.75,
            review_floor: DEFAULT_REVIEW_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub short_shot: usize,
    pub best_long_shot: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub mapping: ShotMapping,
    pub review: Vec<ReviewItem>,
}

/// First, middle and last frame of a shot.
pub fn shot_sample_frames(shot: &Shot) -> [usize; 3] {
    [shot.start_frame, shot.middle_frame(), shot.end_frame]
}

fn describe_shots(
    side: &VideoSide,
    frames: &dyn FrameSource,
    sift: &SiftParams,
) -> Result<Vec<[FrameFeatures; 3]>> {
    let n = frames.info().frame_count;
    side.shots
        .iter()
        .map(|shot| {
            let [a, b, c] = shot_sample_frames(shot).map(|f| {
                if f >= n {
                    return Err(Error::invalid(format!(
                        "{}: shot {} references frame {f} beyond {n} decoded frames",
                        side.video.video_id, shot.shot_id
                    )));
                }
                Ok(detect_and_describe(&frames.frame(f)?, sift))
            });
            Ok([a?, b?, c?])
        })
        .collect()
}

/// Map every short shot to the long shot with the highest mean keypoint
/// similarity over the first/middle/last frame pairs. Ties go to the earliest
/// long shot; weak matches are still mapped but also listed for review.
pub fn match_shots(
    short: &VideoSide,
    long: &VideoSide,
    short_frames: &dyn FrameSource,
    long_frames: &dyn FrameSource,
    opts: &MatchOptions,
) -> Result<MatchOutcome> {
    if long.shots.is_empty() {
        return Err(Error::invalid(format!("{}: no shots", long.video.video_id)));
    }
    let short_desc = describe_shots(short, short_frames, &opts.sift)?;
    let long_desc = describe_shots(long, long_frames, &opts.sift)?;
    let mut entries = Vec::with_capacity(short_desc.len());
    let mut review = Vec::new();
    for (short_id, sd) in short_desc.iter().enumerate() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (long_id, ld) in long_desc.iter().enumerate() {
            let sim = sd
                .iter()
                .zip(ld)
                .map(|(a, b)| similarity(a, b, opts.ratio))
                .sum::<f64>()
                / 3.0;
            if sim > best.1 {
                best = (long_id, sim);
            }
        }
        let (long_shot, sim) = best;
        if sim < opts.review_floor {
            review.push(ReviewItem {
                short_shot: short_id,
                best_long_shot: long_shot,
                similarity: sim,
            });
        }
        entries.push(MappingEntry {
            short_shot: short_id,
            long_shot,
            similarity: sim,
        });
    }
    Ok(MatchOutcome {
        mapping: ShotMapping { entries },
        review,
    })
}
