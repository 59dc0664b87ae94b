use super::{FeatureMap, FrameEmbedder, SpanEmbedder, Stream, VisualBackend};
use crate::error::{Error, Result};
use crate::media::{AudioTrack, FrameSource, GrayFrame};
use crate::sampling::ClipSet;

fn check_row(row: &[f32], dim: usize) -> Result<()> {
    if row.len() != dim {
        return Err(Error::LengthMismatch {
            what: "embedding row",
            expected: dim,
            got: row.len(),
        });
    }
    Ok(())
}

fn clip_frames(frames: &dyn FrameSource, indices: &[usize]) -> Result<Vec<GrayFrame>> {
    indices.iter().map(|&i| frames.frame(i)).collect()
}

/// One row per clip. Frame-level backends are routed to the averaged baseline.
pub fn embed_visual(
    clips: &ClipSet,
    frames: &dyn FrameSource,
    backend: &mut VisualBackend,
) -> Result<FeatureMap> {
    let clip = match backend {
        VisualBackend::Frame(b) => return embed_frame_level_baseline(clips, frames, b.as_mut()),
        VisualBackend::Clip(b) => b,
    };
    let spec = clip.spec().clone();
    let mut values = Vec::with_capacity(clips.len() * spec.dim);
    for c in &clips.clips {
        let row = clip.embed_clip(&clip_frames(frames, &c.frame_indices)?)?;
        check_row(&row, spec.dim)?;
        values.extend(row);
    }
    FeatureMap::new(Stream::Visual, spec.backend_id, clips.len(), spec.dim, values)
}

/// Frame embeddings averaged over each clip's frames.
pub fn embed_frame_level_baseline(
    clips: &ClipSet,
    frames: &dyn FrameSource,
    backend: &mut dyn FrameEmbedder,
) -> Result<FeatureMap> {
    let spec = backend.spec().clone();
    let mut values = Vec::with_capacity(clips.len() * spec.dim);
    for c in &clips.clips {
        let mut acc = vec![0.0f64; spec.dim];
        for &i in &c.frame_indices {
            let row = backend.embed_frame(&frames.frame(i)?)?;
            check_row(&row, spec.dim)?;
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v as f64;
            }
        }
        let n = c.frame_indices.len().max(1) as f64;
        values.extend(acc.into_iter().map(|a| (a / n) as f32));
    }
    FeatureMap::new(Stream::Visual, spec.backend_id, clips.len(), spec.dim, values)
}

#[derive(Debug, Clone)]
pub struct AudioEmbedding {
    pub features: FeatureMap,
    /// The video had no audio track and silence was embedded instead.
    pub substituted_silence: bool,
}

/// One row per clip over the clip's audio span.
pub fn embed_audio(
    clips: &ClipSet,
    audio: Option<&AudioTrack>,
    backend: &mut dyn SpanEmbedder,
) -> Result<AudioEmbedding> {
    let spec = backend.spec().clone();
    let silent = AudioTrack {
        sample_rate: crate::media::DECODE_SAMPLE_RATE,
        samples: Vec::new(),
    };
    let track = match audio {
        Some(t) => t,
        None => {
            log::warn!("{}: no audio track, embedding silence", clips.video_id);
            &silent
        }
    };
    let mut values = Vec::with_capacity(clips.len() * spec.dim);
    let mut zeros = Vec::new();
    for c in &clips.clips {
        let (a, b) = c.audio_span;
        let row = if audio.is_some() {
            backend.embed_span(track.span(a, b), track.sample_rate)?
        } else {
            let n = ((b - a) * track.sample_rate as f64).round().max(0.0) as usize;
            zeros.resize(n, 0.0);
            backend.embed_span(&zeros, track.sample_rate)?
        };
        check_row(&row, spec.dim)?;
        values.extend(row);
    }
    Ok(AudioEmbedding {
        features: FeatureMap::new(Stream::Audio, spec.backend_id, clips.len(), spec.dim, values)?,
        substituted_silence: audio.is_none(),
    })
}
