use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    convex, fuse_early, fuse_late, AttentionBackbone, AttentionScorerConfig, FusionConfig,
    FusionMode, ImportanceVector, LossKind, Scorer,
};
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::features::FeatureMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Bce,
            epochs: 50,
            batch_size: 1,
            learning_rate: 0.001,
            seed: 0,
        }
    }
}

/// One training video: its feature maps and clip-level labels (the label at
/// each clip's focal frame).
#[derive(Debug, Clone)]
pub struct TrainingVideo {
    pub video_id: String,
    pub visual: Option<FeatureMap>,
    pub audio: Option<FeatureMap>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss over the training videos, per epoch, measured before each
    /// video's update.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

// Scorer seeds are fixed per role so that visual_only matches late fusion at
// alpha = 1 (and audio_only at alpha = 0) parameter for parameter.
const VISUAL_TAG: u64 = 0x7669_7375;
const AUDIO_TAG: u64 = 0x6175_6469;
const EARLY_TAG: u64 = 0x6561_726c;
const SHUFFLE_TAG: u64 = 0x7368_7566;

fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdSumModel {
    pub fusion: FusionConfig,
    pub scorer_config: AttentionScorerConfig,
    pub visual_backend: Option<String>,
    pub audio_backend: Option<String>,
    /// visual_only and late
    pub visual: Option<Scorer>,
    /// audio_only and late
    pub audio: Option<Scorer>,
    /// early
    pub fused: Option<Scorer>,
}

struct Pass {
    scores: Vec<f64>,
    visual: Option<super::Forward>,
    audio: Option<super::Forward>,
    fused: Option<super::Forward>,
}

impl AdSumModel {
    /// Fresh model for feature maps shaped like `visual` / `audio`.
    pub fn init(
        cfg: &AttentionScorerConfig,
        fusion: FusionConfig,
        backbone: AttentionBackbone,
        visual: Option<&FeatureMap>,
        audio: Option<&FeatureMap>,
    ) -> Result<Self> {
        fusion.validate()?;
        if backbone.id() != cfg.attention_backbone_id {
            return Err(Error::invalid(format!(
                "attention backbone `{}` does not match configured `{}`",
                backbone.id(),
                cfg.attention_backbone_id
            )));
        }
        let need = |fm: Option<&FeatureMap>, used: bool, what: &str| -> Result<Option<FeatureMap>> {
            match (fm, used) {
                (Some(f), true) => Ok(Some(f.clone())),
                (None, true) => Err(Error::invalid(format!("{what} features required by fusion mode"))),
                (_, false) => Ok(None),
            }
        };
        let v = need(visual, fusion.mode.uses_visual(), "visual")?;
        let a = need(audio, fusion.mode.uses_audio(), "audio")?;
        let scorer = |fm: &FeatureMap, tag| {
            Scorer::new(backbone.clone(), fm.dim, cfg.train_attention, derive_seed(cfg.seed, tag))
        };
        let mut model = Self {
            fusion,
            scorer_config: cfg.clone(),
            visual_backend: v.as_ref().map(|f| f.backend_id.clone()),
            audio_backend: a.as_ref().map(|f| f.backend_id.clone()),
            visual: None,
            audio: None,
            fused: None,
        };
        match fusion.mode {
            FusionMode::VisualOnly => model.visual = Some(scorer(v.as_ref().unwrap(), VISUAL_TAG)),
            FusionMode::AudioOnly => model.audio = Some(scorer(a.as_ref().unwrap(), AUDIO_TAG)),
            FusionMode::Late => {
                model.visual = Some(scorer(v.as_ref().unwrap(), VISUAL_TAG));
                model.audio = Some(scorer(a.as_ref().unwrap(), AUDIO_TAG));
            }
            FusionMode::Early => {
                let (v, a) = (v.as_ref().unwrap(), a.as_ref().unwrap());
                if v.dim != a.dim {
                    return Err(Error::ShapeMismatch {
                        what: "early fusion stream dims",
                        expected: (v.num_clips, v.dim),
                        got: (a.num_clips, a.dim),
                    });
                }
                model.fused = Some(scorer(v, EARLY_TAG));
            }
        }
        Ok(model)
    }

    fn scorers_mut(&mut self) -> [Option<&mut Scorer>; 3] {
        [self.visual.as_mut(), self.audio.as_mut(), self.fused.as_mut()]
    }

    /// Hand a pretrained attention network to every scorer after loading.
    pub fn attach_backbone(&mut self, backbone: AttentionBackbone) -> Result<()> {
        for s in self.scorers_mut().into_iter().flatten() {
            s.attach_backbone(backbone.clone())?;
        }
        Ok(())
    }

    fn check_backend(&self, fm: Option<&FeatureMap>, expected: &Option<String>, what: &str) -> Result<()> {
        if let (Some(exp), Some(fm)) = (expected, fm) {
            if &fm.backend_id != exp {
                return Err(Error::CheckpointMismatch(format!(
                    "model was trained on {what} backend `{exp}`, got `{}`",
                    fm.backend_id
                )));
            }
        }
        Ok(())
    }

    fn pass(&self, visual: Option<&FeatureMap>, audio: Option<&FeatureMap>) -> Result<Pass> {
        let mode = self.fusion.mode;
        let v = if mode.uses_visual() {
            self.check_backend(visual, &self.visual_backend, "visual")?;
            Some(visual.ok_or_else(|| Error::invalid("visual features missing"))?)
        } else {
            None
        };
        let a = if mode.uses_audio() {
            self.check_backend(audio, &self.audio_backend, "audio")?;
            Some(audio.ok_or_else(|| Error::invalid("audio features missing"))?)
        } else {
            None
        };
        let missing = || Error::CheckpointMismatch(format!("model has no scorer for mode {mode:?}"));
        Ok(match mode {
            FusionMode::VisualOnly => {
                let fw = self.visual.as_ref().ok_or_else(missing)?.forward(v.unwrap())?;
                Pass { scores: fw.scores.clone(), visual: Some(fw), audio: None, fused: None }
            }
            FusionMode::AudioOnly => {
                let fw = self.audio.as_ref().ok_or_else(missing)?.forward(a.unwrap())?;
                Pass { scores: fw.scores.clone(), visual: None, audio: Some(fw), fused: None }
            }
            FusionMode::Early => {
                let fm = fuse_early(v.unwrap(), a.unwrap(), self.fusion.beta)?;
                let fw = self.fused.as_ref().ok_or_else(missing)?.forward(&fm)?;
                Pass { scores: fw.scores.clone(), visual: None, audio: None, fused: Some(fw) }
            }
            FusionMode::Late => {
                let fv = self.visual.as_ref().ok_or_else(missing)?.forward(v.unwrap())?;
                let fa = self.audio.as_ref().ok_or_else(missing)?.forward(a.unwrap())?;
                let scores = fuse_late(
                    &ImportanceVector::new(fv.scores.clone()),
                    &ImportanceVector::new(fa.scores.clone()),
                    self.fusion.alpha,
                )?
                .scores;
                Pass { scores, visual: Some(fv), audio: Some(fa), fused: None }
            }
        })
    }

    /// Clip-level importance. Streams the fusion mode does not use are ignored
    /// and may be `None`.
    pub fn predict(&self, visual: Option<&FeatureMap>, audio: Option<&FeatureMap>) -> Result<ImportanceVector> {
        Ok(ImportanceVector::new(self.pass(visual, audio)?.scores))
    }
}

/// Serialized model plus everything needed to check it is reused consistently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub fingerprint: String,
    pub train_config: TrainConfig,
    pub model: AdSumModel,
    pub report: TrainReport,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::io::read_json(path)
    }

    pub fn ensure_fingerprint(&self, current: &str) -> Result<()> {
        if self.fingerprint != current {
            return Err(Error::FingerprintMismatch {
                checkpoint: self.fingerprint.clone(),
                current: current.to_string(),
            });
        }
        Ok(())
    }
}

/// Adam over `epochs` passes of the training set in a seeded shuffled order,
/// `batch_size` videos per update. Single-threaded and deterministic.
pub fn train(
    videos: &[TrainingVideo],
    scorer_cfg: &AttentionScorerConfig,
    backbone: AttentionBackbone,
    fusion: FusionConfig,
    tc: &TrainConfig,
) -> Result<(AdSumModel, TrainReport)> {
    let first = videos
        .first()
        .ok_or_else(|| Error::invalid("empty training set"))?;
    if tc.batch_size == 0 {
        return Err(Error::invalid("batch_size must be positive"));
    }
    if !(tc.learning_rate >= 0.0) {
        return Err(Error::invalid("learning rate must be non-negative"));
    }
    let mut model = AdSumModel::init(
        scorer_cfg,
        fusion,
        backbone,
        first.visual.as_ref(),
        first.audio.as_ref(),
    )?;
    let mut opts: Vec<Option<Adam>> = model
        .scorers_mut()
        .into_iter()
        .map(|s| s.map(|s| Adam::new(tc.learning_rate, s.params.len())))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tc.seed, SHUFFLE_TAG));
    let mut order: Vec<usize> = (0..videos.len()).collect();
    let mut epoch_losses = Vec::with_capacity(tc.epochs);
    let mut steps = 0;
    let alpha = fusion.alpha;

    for epoch in 0..tc.epochs {
        order.shuffle(&mut rng);
        let mut losses = vec![0.0; videos.len()];
        for batch in order.chunks(tc.batch_size) {
            let mut grads: [Option<Vec<f64>>; 3] = [None, None, None];
            for &vi in batch {
                let video = &videos[vi];
                let pass = model.pass(video.visual.as_ref(), video.audio.as_ref())?;
                if video.labels.len() != pass.scores.len() {
                    return Err(Error::LengthMismatch {
                        what: "clip labels",
                        expected: pass.scores.len(),
                        got: video.labels.len(),
                    });
                }
                let loss = tc.loss.loss(&pass.scores, &video.labels)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        video_id: video.video_id.clone(),
                    });
                }
                losses[vi] = loss;
                let dp = tc.loss.grad(&pass.scores, &video.labels)?;
                let scale = |w: f64| dp.iter().map(|g| g * w).collect::<Vec<_>>();
                let parts = [
                    (0, pass.visual.as_ref(), model.visual.as_ref(), if fusion.mode == FusionMode::Late { convex(alpha, 1.0, 0.0) } else { 1.0 }),
                    (1, pass.audio.as_ref(), model.audio.as_ref(), if fusion.mode == FusionMode::Late { convex(alpha, 0.0, 1.0) } else { 1.0 }),
                    (2, pass.fused.as_ref(), model.fused.as_ref(), 1.0),
                ];
                for (slot, fw, scorer, w) in parts {
                    if let (Some(fw), Some(scorer)) = (fw, scorer) {
                        let g = scorer.backward(fw, &scale(w))?;
                        match &mut grads[slot] {
                            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                            none => *none = Some(g),
                        }
                    }
                }
            }
            let n = batch.len() as f64;
            for ((scorer, opt), grad) in model.scorers_mut().into_iter().zip(&mut opts).zip(grads) {
                if let (Some(s), Some(opt), Some(mut g)) = (scorer, opt.as_mut(), grad) {
                    if n > 1.0 {
                        g.iter_mut().for_each(|v| *v /= n);
                    }
                    opt.step(&mut s.params, &g);
                }
            }
            steps += 1;
        }
        let mean = losses.iter().sum::<f64>() / videos.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok((model, TrainReport { epoch_losses, steps }))
}
