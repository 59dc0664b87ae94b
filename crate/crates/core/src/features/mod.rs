//! Per-clip embeddings for each stream, the backends that produce them, and
//! the on-disk feature cache.

mod backends;
mod cache;
mod extract;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backends::{
    backend_spec, create_audio_backend, create_visual_backend, ClipEmbedder, FrameEmbedder,
    FrameMeanPixel, MeanPixel, PixelProjection, RmsBands, SpectrumProjection, SpanEmbedder, VisualBackend, REFERENCE_AUDIO,
    REFERENCE_FRAME_2D, REFERENCE_VISUAL,
};
pub use cache::{CacheKey, CacheLookup, FeatureCache};
pub use extract::{embed_audio, embed_frame_level_baseline, embed_visual, AudioEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Visual,
    Audio,
}

impl Stream {
    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Visual => "visual",
            Stream::Audio => "audio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingBackendSpec {
    pub backend_id: String,
    pub stream: Stream,
    pub dim: usize,
    pub deterministic: bool,
    /// Embeds single frames; clip rows are the mean over the clip's frames.
    pub frame_level: bool,
}

/// `T x D` per-clip embedding matrix of one stream of one video, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub stream: Stream,
    pub backend_id: String,
    pub num_clips: usize,
    pub dim: usize,
    pub values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(
        stream: Stream,
        backend_id: impl Into<String>,
        num_clips: usize,
        dim: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if values.len() != num_clips * dim {
            return Err(Error::LengthMismatch {
                what: "feature map values",
                expected: num_clips * dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map contains non-finite values"));
        }
        Ok(Self {
            stream,
            backend_id: backend_id.into(),
            num_clips,
            dim,
            values,
        })
    }

    pub fn from_rows(stream: Stream, backend_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::LengthMismatch {
                what: "feature row",
                expected: dim,
                got: bad.len(),
            });
        }
        Self::new(stream, backend_id, rows.len(), dim, rows.concat())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_clips, self.dim)
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// Per-video, per-column z-score. Off by default; ablation switch only.
    pub fn zscored(&self) -> FeatureMap {
        let (t, d) = self.shape();
        let mut out = self.values.clone();
        if t == 0 {
            return self.clone();
        }
        for c in 0..d {
            let col = (0..t).map(|r| self.values[r * d + c] as f64);
            let mean = col.clone().sum::<f64>() / t as f64;
            let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / t as f64;
            let sd = var.sqrt();
            for r in 0..t {
                let v = self.values[r * d + c] as f64 - mean;
                out[r * d + c] = if sd > 1e-12 { (v / sd) as f32 } else { 0.0 };
            }
        }
        FeatureMap {
            values: out,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_is_checked() {
        assert!(FeatureMap::new(Stream::Visual, "x", 2, 3, vec![0.0; 5]).is_err());
        assert!(FeatureMap::new(Stream::Visual, "x", 1, 1, vec![f32::NAN]).is_err());
        let fm = FeatureMap::from_rows(Stream::Audio, "x", &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(fm.shape(), (2, 2));
        assert_eq!(fm.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn zscore_centres_columns() {
        let fm = FeatureMap::from_rows(Stream::Audio, "x", &[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let z = fm.zscored();
        assert_eq!(z.values, vec![-1.0, 0.0, 1.0, 0.0]);
    }
}
