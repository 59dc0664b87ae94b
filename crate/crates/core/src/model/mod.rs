//! Importance scoring: attention over the feature map, Hadamard merge,
//! per-clip sigmoid head, stream fusion and training.

mod attention;
mod loss;
mod optim;
mod scorer;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;

pub use attention::{
    resize_bilinear, Activation, AttentionBackbone, ImageBackbone, CONV3X3, GOOGLENET, ROW_LOCAL,
};
pub use loss::{bce_grad, bce_loss, mse_grad, mse_loss, LossKind, BCE_EPS};
pub use optim::Adam;
pub use scorer::{Forward, Scorer};
pub use train::{train, AdSumModel, Checkpoint, TrainConfig, TrainReport, TrainingVideo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionScorerConfig {
    pub attention_backbone_id: String,
    pub seed: u64,
    /// Update the backbone's own parameters during training. Only the
    /// synthetic backbones have any; pretrained networks stay frozen.
    pub train_attention: bool,
}

impl Default for AttentionScorerConfig {
    fn default() -> Self {
        Self {
            attention_backbone_id: ROW_LOCAL.into(),
            seed: 0,
            train_attention: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    VisualOnly,
    AudioOnly,
    #[default]
    Early,
    Late,
}

impl FusionMode {
    pub fn uses_visual(self) -> bool {
        self != FusionMode::AudioOnly
    }

    pub fn uses_audio(self) -> bool {
        self != FusionMode::VisualOnly
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub mode: FusionMode,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode: FusionMode::Early,
            alpha: 0.5,
            beta: 0.5,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-clip importance scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub scores: Vec<f64>,
}

impl ImportanceVector {
    pub fn new(scores: Vec<f64>) -> Self {
        Self { scores }
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Broadcast clip `t` over frames `[t * stride, (t + 1) * stride)`.
    pub fn expand(&self, frame_count: usize, stride: usize) -> Result<Vec<f64>> {
        if stride == 0 {
            return Err(Error::invalid("stride must be positive"));
        }
        let expected = frame_count.div_ceil(stride);
        if self.len() != expected {
            return Err(Error::LengthMismatch {
                what: "clip scores for frame expansion",
                expected,
                got: self.len(),
            });
        }
        Ok((0..frame_count).map(|f| self.scores[f / stride]).collect())
    }
}

pub fn score_stream(fm: &FeatureMap, scorer: &Scorer) -> Result<ImportanceVector> {
    Ok(ImportanceVector::new(scorer.forward(fm)?.scores))
}

/// `alpha * iv + (1 - alpha) * ia`, elementwise.
pub fn fuse_late(iv: &ImportanceVector, ia: &ImportanceVector, alpha: f64) -> Result<ImportanceVector> {
    if iv.len() != ia.len() {
        return Err(Error::LengthMismatch {
            what: "late fusion",
            expected: iv.len(),
            got: ia.len(),
        });
    }
    Ok(ImportanceVector::new(
        iv.scores
            .iter()
            .zip(&ia.scores)
            .map(|(v, a)| convex(alpha, *v, *a))
            .collect(),
    ))
}

/// `beta * fv + (1 - beta) * fa`, elementwise.
pub fn fuse_early(fv: &FeatureMap, fa: &FeatureMap, beta: f64) -> Result<FeatureMap> {
    if fv.shape() != fa.shape() {
        return Err(Error::ShapeMismatch {
            what: "early fusion",
            expected: fv.shape(),
            got: fa.shape(),
        });
    }
    let values = fv
        .values
        .iter()
        .zip(&fa.values)
        .map(|(&v, &a)| convex(beta, v as f64, a as f64) as f32)
        .collect();
    FeatureMap::new(
        fv.stream,
        format!("early({},{})", fv.backend_id, fa.backend_id),
        fv.num_clips,
        fv.dim,
        values,
    )
}

/// Exact at the endpoints, and `x` when both inputs are `x`.
pub(crate) fn convex(w: f64, a: f64, b: f64) -> f64 {
    if w == 1.0 || a == b {
        a
    } else if w == 0.0 {
        b
    } else {
        w * a + (1.0 - w) * b
    }
}
