//! Shot-level aggregation, greedy budgeted selection and cut lists.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::dataset::{AdPair, Shot};
use crate::error::{Error, Result};
use crate::media::{AudioTrack, FrameSource, Video};

pub const DEFAULT_BUDGET_SECONDS: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotScore {
    pub shot_id: usize,
    pub start_frame: usize,
    pub mean_score: f64,
    pub duration_seconds: f64,
    /// 1-based; descending mean score, ties to the smaller shot id.
    pub rank: usize,
}

/// Mean of the per-frame scores inside each shot, ranked.
pub fn aggregate_shot_scores(frame_scores: &[f64], shots: &[Shot], fps: f64) -> Result<Vec<ShotScore>> {
    let frame_count = shots.last().map_or(0, |s| s.end_frame + 1);
    if frame_scores.len() != frame_count {
        return Err(Error::LengthMismatch {
            what: "frame scores",
            expected: frame_count,
            got: frame_scores.len(),
        });
    }
    let mut out: Vec<ShotScore> = shots
        .iter()
        .map(|s| {
            let seg = &frame_scores[s.start_frame..=s.end_frame];
            ShotScore {
                shot_id: s.shot_id,
                start_frame: s.start_frame,
                mean_score: seg.iter().sum::<f64>() / seg.len() as f64,
                duration_seconds: s.duration_seconds(fps),
                rank: 0,
            }
        })
        .collect();
    assign_ranks(&mut out);
    Ok(out)
}

/// Overwrite `rank` from `mean_score`.
pub fn assign_ranks(scores: &mut [ShotScore]) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .mean_score
            .total_cmp(&scores[a].mean_score)
            .then(scores[a].shot_id.cmp(&scores[b].shot_id))
    });
    for (r, i) in order.into_iter().enumerate() {
        scores[i].rank = r + 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// In selection (rank) order.
    pub selected_shot_ids: Vec<usize>,
    /// Selected shots in temporal order.
    pub playback_order: Vec<usize>,
    pub total_duration_seconds: f64,
    pub budget_seconds: f64,
}

/// Take shots by rank until the cumulative duration reaches the budget.
/// Overshoot is kept; short inputs select every shot.
pub fn select_shots(scores: &[ShotScore], budget_seconds: f64) -> Result<SelectionResult> {
    if scores.is_empty() {
        return Err(Error::invalid("no shots to select from"));
    }
    if !(budget_seconds > 0.0) {
        return Err(Error::invalid(format!("budget must be positive, got {budget_seconds}")));
    }
    let mut by_rank: Vec<&ShotScore> = scores.iter().collect();
    by_rank.sort_by_key(|s| s.rank);
    let mut selected = Vec::new();
    let mut total = 0.0;
    for s in by_rank {
        selected.push(s);
        total += s.duration_seconds;
        if total >= budget_seconds {
            break;
        }
    }
    let selected_shot_ids = selected.iter().map(|s| s.shot_id).collect();
    selected.sort_by_key(|s| s.start_frame);
    Ok(SelectionResult {
        selected_shot_ids,
        playback_order: selected.iter().map(|s| s.shot_id).collect(),
        total_duration_seconds: total,
        budget_seconds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub shot_id: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutList {
    pub pair_id: String,
    pub budget: f64,
    pub segments: Vec<Segment>,
    pub total_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl CutList {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }
}

/// Frame-accurate segments of the long video, in playback order.
pub fn emit_cut_list(sel: &SelectionResult, pair: &AdPair) -> Result<CutList> {
    let fps = pair.long.video.fps;
    let shots = &pair.long.shots;
    let segments = sel
        .playback_order
        .iter()
        .map(|&id| {
            let s = shots.get(id).ok_or_else(|| Error::UnknownShot {
                video: pair.long.video.video_id.clone(),
                shot_id: id,
            })?;
            Ok(Segment {
                shot_id: id,
                start_frame: s.start_frame,
                end_frame: s.end_frame,
                start_s: s.start_frame as f64 / fps,
                end_s: (s.end_frame + 1) as f64 / fps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total_s = segments
        .iter()
        .map(|s| (s.end_frame - s.start_frame + 1) as f64 / fps)
        .sum();
    Ok(CutList {
        pair_id: pair.pair_id.clone(),
        budget: sel.budget_seconds,
        segments,
        total_s,
        fingerprint: None,
    })
}

/// Concatenate the cut list's segments of a decoded video, audio included.
pub fn splice(video: &Video, cut: &CutList) -> Result<Video> {
    let n = video.info().frame_count;
    let mut frames = Vec::new();
    let mut samples = Vec::new();
    for s in &cut.segments {
        if s.end_frame >= n || s.start_frame > s.end_frame {
            return Err(Error::invalid(format!("segment {}..={} outside {n} frames", s.start_frame, s.end_frame)));
        }
        for i in s.start_frame..=s.end_frame {
            frames.push(video.frame(i)?);
        }
        if let Some(a) = video.audio() {
            samples.extend_from_slice(a.span(s.start_s, s.end_s));
        }
    }
    let audio = video.audio().map(|a| AudioTrack {
        sample_rate: a.sample_rate,
        samples,
    });
    Video::from_frames(video.info().fps, frames, audio)
}

/// ffmpeg `filter_complex` that trims each segment's video and audio and
/// concatenates them.
pub fn concat_filter(cut: &CutList, with_audio: bool) -> String {
    let mut f = String::new();
    let mut inputs = String::new();
    for (i, s) in cut.segments.iter().enumerate() {
        f.push_str(&format!(
            "[0:v]trim=start_frame={}:end_frame={},setpts=PTS-STARTPTS[v{i}];",
            s.start_frame,
            s.end_frame + 1
        ));
        inputs.push_str(&format!("[v{i}]"));
        if with_audio {
            f.push_str(&format!(
                "[0:a]atrim=start={:.6}:end={:.6},asetpts=PTS-STARTPTS[a{i}];",
                s.start_s, s.end_s
            ));
            inputs.push_str(&format!("[a{i}]"));
        }
    }
    let n = cut.segments.len();
    let a = with_audio as u8;
    f.push_str(&format!("{inputs}concat=n={n}:v=1:a={a}[outv]"));
    if with_audio {
        f.push_str("[outa]");
    }
    f
}

/// Render the cut list with ffmpeg. The cut list itself is the canonical
/// artifact; this only fails with `ToolMissing` when ffmpeg cannot be run.
pub fn assemble(cut: &CutList, source: &Path, output: &Path, ffmpeg: &str, with_audio: bool) -> Result<PathBuf> {
    if cut.segments.is_empty() {
        return Err(Error::invalid("empty cut list"));
    }
    if !source.exists() {
        return Err(Error::MissingFile(source.to_path_buf()));
    }
    let mut cmd = Command::new(ffmpeg);
    cmd.args(["-y", "-v", "error", "-i"])
        .arg(source)
        .args(["-filter_complex", &concat_filter(cut, with_audio), "-map", "[outv]"]);
    if with_audio {
        cmd.args(["-map", "[outa]"]);
    }
    cmd.arg(output);
    let out = cmd.output().map_err(|e| Error::ToolMissing {
        tool: ffmpeg.to_string(),
        reason: e.to_string(),
    })?;
    if !out.status.success() {
        return Err(Error::ToolFailed {
            tool: ffmpeg.to_string(),
            message: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    Ok(output.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::shots_from_ranges;

    fn ss(id: usize, mean: f64, dur: f64) -> ShotScore {
        ShotScore {
            shot_id: id,
            start_frame: id * 100,
            mean_score: mean,
            duration_seconds: dur,
            rank: 0,
        }
    }

    fn ranked(mut v: Vec<ShotScore>) -> Vec<ShotScore> {
        assign_ranks(&mut v);
        v
    }

    #[test]
    fn hand_simulated_greedy() {
        let s = ranked(vec![ss(0, 0.9, 10.0), ss(1, 0.7, 6.0), ss(2, 0.3, 4.0)]);
        let r = select_shots(&s, 15.0).unwrap();
        assert_eq!(r.selected_shot_ids, vec![0, 1]);
        assert_eq!(r.total_duration_seconds, 16.0);
        let r = select_shots(&ranked(vec![ss(0, 0.2, 20.0)]), 15.0).unwrap();
        assert_eq!(r.selected_shot_ids, vec![0]);
        let r = select_shots(&ranked(vec![ss(0, 0.2, 5.0), ss(1, 0.9, 7.0)]), 15.0).unwrap();
        assert_eq!(r.selected_shot_ids, vec![1, 0]);
        assert_eq!(r.playback_order, vec![0, 1]);
        assert_eq!(r.total_duration_seconds, 12.0);
        assert!(select_shots(&[], 15.0).is_err());
    }

    #[test]
    fn ties_go_to_the_earlier_shot() {
        let s = ranked(vec![ss(0, 0.5, 1.0), ss(1, 0.9, 1.0), ss(2, 0.5, 1.0)]);
        assert_eq!(s.iter().map(|x| x.rank).collect::<Vec<_>>(), vec![2, 1, 3]);
    }

    #[test]
    fn aggregation() {
        let shots = shots_from_ranges(&[(0, 1), (2, 2), (3, 5)]);
        let a = aggregate_shot_scores(&[0.2, 0.8, 0.4, 0.5, 0.5, 0.5], &shots, 2.0).unwrap();
        assert_eq!(a[0].mean_score, 0.5);
        assert_eq!(a[1].mean_score, 0.4);
        assert_eq!(a[2].duration_seconds, 1.5);
        assert_eq!(a.iter().map(|x| x.rank).collect::<Vec<_>>(), vec![1, 3, 2]);
        assert!(aggregate_shot_scores(&[0.1; 5], &shots, 2.0).is_err());
    }

    #[test]
    fn filter_graph_shape() {
        let cut = CutList {
            pair_id: "p".into(),
            budget: 15.0,
            segments: vec![
                Segment { shot_id: 1, start_frame: 10, end_frame: 19, start_s: 0.5, end_s: 1.0 },
                Segment { shot_id: 3, start_frame: 40, end_frame: 49, start_s: 2.0, end_s: 2.5 },
            ],
            total_s: 1.0,
            fingerprint: None,
        };
        let f = concat_filter(&cut, true);
        assert!(f.contains("trim=start_frame=10:end_frame=20"));
        assert!(f.ends_with("[v0][a0][v1][a1]concat=n=2:v=1:a=1[outv][outa]"));
        let err = assemble(&cut, Path::new("Cargo.toml"), Path::new("/tmp/x.mp4"), "definitely-not-ffmpeg-xyz", true)
            .unwrap_err();
        assert!(err.is_missing_dependency());
    }
}
