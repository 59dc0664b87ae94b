//! Run configuration shared by every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::DEFAULT_REVIEW_FLOOR;
use crate::error::{Error, Result};
use crate::model::{
    AttentionScorerConfig, FusionConfig, FusionMode, LossKind, TrainConfig, ROW_LOCAL,
};
use crate::sampling::{DEFAULT_HWS, DEFAULT_STRIDE};
use crate::selection::DEFAULT_BUDGET_SECONDS;

/// Environment variable overriding `cache_dir`.
pub const CACHE_DIR_ENV: &str = "ADSUM_CACHE_DIR";
pub const STANDARD_FPS: f64 = 23.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,

    pub visual_backend: String,
    pub audio_backend: String,
    pub stride: usize,
    pub hws: usize,
    /// Per-video column z-score of feature maps before scoring.
    pub normalize_features: bool,

    pub fusion: FusionMode,
    pub alpha: f64,
    pub beta: f64,
    pub attention_backbone: String,
    pub train_attention: bool,

    pub loss: LossKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,

    pub budget_seconds: f64,
    pub seed: u64,
    pub folds: usize,

    pub thresholds: Vec<f64>,
    pub collapse_runs: bool,
    pub review_floor: f64,
    pub target_fps: f64,

    /// Worker threads for per-video work; does not affect results.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("manifest.json"),
            cache_dir: PathBuf::from("cache"),
            output_dir: PathBuf::from("out"),
            visual_backend: "pixel-proj-1024".into(),
            audio_backend: "spectrum-proj-1024".into(),
            stride: DEFAULT_STRIDE,
            hws: DEFAULT_HWS,
            normalize_features: false,
            fusion: FusionMode::Early,
            alpha: 0.5,
            beta: 0.5,
            attention_backbone: ROW_LOCAL.into(),
            train_attention: true,
            loss: LossKind::Bce,
            epochs: 50,
            batch_size: 1,
            learning_rate: 0.001,
            budget_seconds: DEFAULT_BUDGET_SECONDS,
            seed: 0,
            folds: 5,
            thresholds: vec![0.5],
            collapse_runs: false,
            review_floor: DEFAULT_REVIEW_FLOOR,
            target_fps: STANDARD_FPS,
            jobs: 1,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, what: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(what, e))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Defaults, then `file` if given, then the cache-dir environment variable.
    pub fn load(file: Option<&Path>) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()) {
            cfg.cache_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion_config().validate()?;
        let positive = [
            ("stride", self.stride),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("folds", self.folds),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.folds < 2 {
            return Err(Error::invalid("folds must be at least 2"));
        }
        if !(self.budget_seconds > 0.0) {
            return Err(Error::invalid("budget_seconds must be positive"));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::invalid("learning_rate must be non-negative"));
        }
        if !(self.target_fps > 0.0) {
            return Err(Error::invalid("target_fps must be positive"));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::invalid("thresholds must be non-empty and lie in (0,1)"));
        }
        Ok(())
    }

    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            mode: self.fusion,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn scorer_config(&self) -> AttentionScorerConfig {
        AttentionScorerConfig {
            attention_backbone_id: self.attention_backbone.clone(),
            seed: self.seed,
            train_attention: self.train_attention,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }

    /// SHA-256 over every setting that can change a result. Paths and the
    /// worker count are excluded, so relocating a run keeps its fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            for k in ["manifest", "cache_dir", "output_dir", "jobs"] {
                map.remove(k);
            }
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = RunConfig::default();
        assert_eq!((c.stride, c.hws, c.epochs, c.batch_size), (12, 3, 50, 1));
        assert_eq!((c.alpha, c.beta, c.learning_rate, c.budget_seconds), (0.5, 0.5, 0.001, 15.0));
        assert_eq!(c.fusion, FusionMode::Early);
        assert_eq!(c.loss, LossKind::Bce);
        c.validate().unwrap();
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let c = RunConfig::from_toml_str("hws = 5\nfusion = \"late\"\nloss = \"mse\"\n", "t").unwrap();
        assert_eq!((c.hws, c.fusion, c.loss), (5, FusionMode::Late, LossKind::Mse));
        assert_eq!(c.stride, 12);
        assert!(RunConfig::from_toml_str("hsw = 5\n", "t").is_err());
    }

    #[test]
    fn fingerprint_ignores_paths_and_jobs_only() {
        let a = RunConfig::default();
        let b = RunConfig {
            cache_dir: "/elsewhere".into(),
            output_dir: "/x".into(),
            manifest: "/y.json".into(),
            jobs: 8,
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.fingerprint(), c.fingerprint());
        let d = RunConfig { alpha: 0.25, ..a.clone() };
        assert_ne!(a.fingerprint(), d.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn validation() {
        assert!(RunConfig { alpha: 1.5, ..Default::default() }.validate().is_err());
        assert!(RunConfig { folds: 1, ..Default::default() }.validate().is_err());
        assert!(RunConfig { thresholds: vec![1.0], ..Default::default() }.validate().is_err());
    }
}
