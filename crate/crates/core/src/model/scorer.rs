use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{sigmoid, AttentionBackbone};
use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Attention backbone, Hadamard merge and a per-row linear + sigmoid head.
///
/// Parameters live in one flat vector: head weights (`dim`), head bias, then
/// the backbone's trainable parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scorer {
    pub backbone_id: String,
    pub dim: usize,
    pub train_attention: bool,
    pub params: Vec<f64>,
    #[serde(skip)]
    backbone: Option<AttentionBackbone>,
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub t: usize,
    pub x: Vec<f64>,
    pub attention: Vec<f64>,
    pub merged: Vec<f64>,
    pub scores: Vec<f64>,
}

impl PartialEq for Scorer {
    fn eq(&self, other: &Self) -> bool {
        self.backbone_id == other.backbone_id
            && self.dim == other.dim
            && self.train_attention == other.train_attention
            && self.params == other.params
    }
}

impl Scorer {
    pub fn new(backbone: AttentionBackbone, dim: usize, train_attention: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut params: Vec<f64> = (0..dim).map(|_| rng.gen_range(-bound..bound)).collect();
        params.push(0.0);
        match backbone {
            AttentionBackbone::RowLocal => {
                params.extend((0..dim).map(|_| rng.gen_range(-1.0..1.0)));
                params.extend(std::iter::repeat(0.0).take(dim));
            }
            AttentionBackbone::Conv3x3 => {
                params.extend((0..9).map(|_| rng.gen_range(-1.0 / 3.0..1.0 / 3.0)));
                params.push(0.0);
            }
            AttentionBackbone::Pretrained(_) => {}
        }
        Self {
            backbone_id: backbone.id().to_string(),
            dim,
            train_attention,
            params,
            backbone: Some(backbone),
        }
    }

    /// Supply a pretrained image network after loading from a checkpoint.
    pub fn attach_backbone(&mut self, backbone: AttentionBackbone) -> Result<()> {
        if backbone.id() != self.backbone_id {
            return Err(Error::CheckpointMismatch(format!(
                "scorer was trained with attention `{}`, got `{}`",
                self.backbone_id,
                backbone.id()
            )));
        }
        self.backbone = Some(backbone);
        Ok(())
    }

    fn backbone(&self) -> Result<AttentionBackbone> {
        match &self.backbone {
            Some(b) => Ok(b.clone()),
            None => AttentionBackbone::from_id(&self.backbone_id),
        }
    }

    pub fn forward(&self, fm: &FeatureMap) -> Result<Forward> {
        let (t, d) = fm.shape();
        if d != self.dim {
            return Err(Error::ShapeMismatch {
                what: "scorer input",
                expected: (t, self.dim),
                got: (t, d),
            });
        }
        let backbone = self.backbone()?;
        let x: Vec<f64> = fm.values.iter().map(|&v| v as f64).collect();
        let attention = backbone.forward(&x, t, d, &self.params[d + 1..])?;
        let merged: Vec<f64> = x.iter().zip(&attention).map(|(a, b)| a * b).collect();
        let (w, b) = (&self.params[..d], self.params[d]);
        let scores = merged
            .chunks_exact(d.max(1))
            .take(t)
            .map(|row| sigmoid(row.iter().zip(w).map(|(m, w)| m * w).sum::<f64>() + b))
            .collect();
        Ok(Forward {
            t,
            x,
            attention,
            merged,
            scores,
        })
    }

    /// Parameter gradient given `d_scores = dL/d scores`.
    pub fn backward(&self, fw: &Forward, d_scores: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut grad = vec![0.0; self.params.len()];
        let mut d_att = vec![0.0; fw.t * d];
        for r in 0..fw.t {
            let p = fw.scores[r];
            let dz = d_scores[r] * p * (1.0 - p);
            if dz == 0.0 {
                continue;
            }
            for c in 0..d {
                let i = r * d + c;
                grad[c] += dz * fw.merged[i];
                d_att[i] = dz * self.params[c] * fw.x[i];
            }
            grad[d] += dz;
        }
        if self.train_attention {
            self.backbone()?
                .backward(&fw.x, fw.t, d, &fw.attention, &d_att, &mut grad[d + 1..]);
        }
        Ok(grad)
    }
}
