//! Shot-confined clips around strided focal frames.

use serde::{Deserialize, Serialize};

use crate::dataset::{shot_of_frame, Shot};
use crate::error::{Error, Result};

pub const DEFAULT_STRIDE: usize = 12;
pub const DEFAULT_HWS: usize = 3;

/// `0, stride, 2*stride, ...` below `frame_count`.
pub fn sample_focal_frames(frame_count: usize, stride: usize) -> Result<Vec<usize>> {
    if frame_count == 0 || stride == 0 {
        return Err(Error::invalid(format!(
            "frame_count and stride must be positive (got {frame_count}, {stride})"
        )));
    }
    Ok((0..frame_count).step_by(stride).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clip {
    pub clip_index: usize,
    pub focal_frame: usize,
    /// `2 * hws + 1` entries, edge frames repeated where the shot is too short.
    pub frame_indices: Vec<usize>,
    pub shot_id: usize,
    pub audio_span: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSet {
    pub video_id: String,
    pub frame_count: usize,
    pub fps: f64,
    pub stride: usize,
    pub hws: usize,
    pub clips: Vec<Clip>,
}

impl ClipSet {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn focal_frames(&self) -> Vec<usize> {
        self.clips.iter().map(|c| c.focal_frame).collect()
    }
}

/// Seconds covered by the clip's distinct frames: `(min / fps, (max + 1) / fps)`.
pub fn audio_span_for(frame_indices: &[usize], fps: f64) -> (f64, f64) {
    let min = frame_indices.iter().copied().min().unwrap_or(0);
    let max = frame_indices.iter().copied().max().unwrap_or(min);
    (min as f64 / fps, (max + 1) as f64 / fps)
}

/// Window of `hws` frames either side of `focal`, clamped into `shot`.
pub fn clip_window(shot: &Shot, focal: usize, hws: usize) -> Vec<usize> {
    let lo = shot.start_frame as isize;
    let hi = shot.end_frame as isize;
    (-(hws as isize)..=hws as isize)
        .map(|o| (focal as isize + o).clamp(lo, hi) as usize)
        .collect()
}

pub fn build_clips(
    video_id: &str,
    shots: &[Shot],
    frame_count: usize,
    fps: f64,
    focal_frames: &[usize],
    hws: usize,
    stride: usize,
) -> Result<ClipSet> {
    if !(fps > 0.0) {
        return Err(Error::invalid(format!("fps must be positive, got {fps}")));
    }
    if focal_frames.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("focal frames must be strictly increasing"));
    }
    let clips = focal_frames
        .iter()
        .enumerate()
        .map(|(clip_index, &focal)| {
            let shot_id = shot_of_frame(shots, focal).ok_or_else(|| Error::Tiling {
                video: video_id.to_string(),
                message: format!("focal frame {focal} lies outside every shot"),
            })?;
            let frame_indices = clip_window(&shots[shot_id], focal, hws);
            let audio_span = audio_span_for(&frame_indices, fps);
            Ok(Clip {
                clip_index,
                focal_frame: focal,
                frame_indices,
                shot_id,
                audio_span,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClipSet {
        video_id: video_id.to_string(),
        frame_count,
        fps,
        stride,
        hws,
        clips,
    })
}

/// Focal-frame sampling and clip construction in one step.
pub fn clips_for_video(
    video_id: &str,
    shots: &[Shot],
    frame_count: usize,
    fps: f64,
    stride: usize,
    hws: usize,
) -> Result<ClipSet> {
    let focal = sample_focal_frames(frame_count, stride)?;
    build_clips(video_id, shots, frame_count, fps, &focal, hws, stride)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::shots_from_ranges;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn shot(s: usize, e: usize) -> Shot {
        Shot {
            shot_id: 0,
            start_frame: s,
            end_frame: e,
        }
    }

    #[test]
    fn focal_frame_counts() {
        let f = sample_focal_frames(720, 12).unwrap();
        assert_eq!(f.len(), 60);
        assert_eq!(*f.last().unwrap(), 708);
        assert_eq!(sample_focal_frames(719, 12).unwrap().len(), 60);
        assert_eq!(sample_focal_frames(1, 12).unwrap(), vec![0]);
        assert!(sample_focal_frames(0, 12).is_err());
        assert!(sample_focal_frames(10, 0).is_err());
    }

    #[test]
    fn windows_clamp_and_replicate() {
        assert_eq!(clip_window(&shot(40, 60), 50, 3), (47..=53).collect::<Vec<_>>());
        assert_eq!(clip_window(&shot(0, 100), 0, 3), vec![0, 0, 0, 0, 1, 2, 3]);
        assert_eq!(clip_window(&shot(10, 11), 10, 3), vec![10, 10, 10, 10, 11, 11, 11]);
    }

    #[test]
    fn audio_spans() {
        let (a, b) = audio_span_for(&(47..=53).collect::<Vec<_>>(), 23.98);
        assert_abs_diff_eq!(a, 1.960, epsilon = 1e-3);
        assert_abs_diff_eq!(b, 2.252, epsilon = 1e-3);
        let (a, b) = audio_span_for(&(0..=6).collect::<Vec<_>>(), 24.0);
        assert_abs_diff_eq!(a, 0.0);
        assert_abs_diff_eq!(b, 0.29167, epsilon = 1e-5);
        let (a, b) = audio_span_for(&[0, 0, 0], 24.0);
        assert_abs_diff_eq!(a, 0.0);
        assert_abs_diff_eq!(b, 1.0 / 24.0, epsilon = 1e-9);
    }

    #[test]
    fn focal_outside_shots_is_a_tiling_error() {
        let shots = shots_from_ranges(&[(0, 9)]);
        assert!(matches!(
            build_clips("v", &shots, 10, 24.0, &[12], 3, 12),
            Err(Error::Tiling { .. })
        ));
    }

    proptest! {
        #[test]
        fn clips_stay_in_their_shot(
            lens in proptest::collection::vec(1usize..60, 1..30),
            stride in 1usize..20,
            hws in 0usize..6,
        ) {
            let mut ranges = Vec::new();
            let mut at = 0;
            for l in &lens {
                ranges.push((at, at + l - 1));
                at += l;
            }
            let shots = shots_from_ranges(&ranges);
            let set = clips_for_video("v", &shots, at, 23.98, stride, hws).unwrap();
            prop_assert_eq!(set.len(), at.div_ceil(stride));
            for c in &set.clips {
                prop_assert_eq!(c.frame_indices.len(), 2 * hws + 1);
                prop_assert!(c.frame_indices.contains(&c.focal_frame));
                for &f in &c.frame_indices {
                    prop_assert!(shots[c.shot_id].contains(f));
                }
            }
        }
    }
}
