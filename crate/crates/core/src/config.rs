//! The full pipeline configuration with its defaults and content hash.
//!
//! Defaults follow the reference conditioning recipe: loss weights 0.01
//! and 10, learning rate 2e-4, batch size 64, 30 epochs per stage, and
//! guidance scales 2 (motion) and 4 (text). Desk-scale runs override the
//! sizes but the defaults are the contract.

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::camera::CameraRanges;
use crate::error::{CoreError, Result};
use crate::io::sha256_bytes;
use crate::metrics::ContactModel;
use crate::synth::Pattern;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub width: usize,
    pub blocks: usize,
    pub n_max: usize,
    pub vocab: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 64,
            blocks: 4,
            n_max: 240,
            vocab: Pattern::ALL.iter().map(|p| p.prompt().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Training clips per stage.
    pub clips: usize,
    /// Held-out clips used for per-epoch validation.
    pub val_clips: usize,
    pub clip_seconds: f64,
    pub fps: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            clips: 200,
            val_clips: 32,
            clip_seconds: 3.0,
            fps: 20.0,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clips == 0 || self.val_clips == 0 {
            return Err(CoreError::Validation(
                "clip counts must be at least 1".into(),
            ));
        }
        if !(self.clip_seconds.is_finite() && self.clip_seconds > 0.0) {
            return Err(CoreError::Validation(format!(
                "clip length must be positive, got {}",
                self.clip_seconds
            )));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(CoreError::Validation(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        Ok(())
    }
}

/// Which part of the pipeline a training run updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrainStage {
    /// Base generator pretraining, no adapters.
    #[serde(rename = "base")]
    Base,
    /// 3D local + global adapters against the frozen base.
    #[serde(rename = "3d")]
    Adapter3d,
    /// 2D local student + warm global adapter, 3D teacher frozen.
    #[serde(rename = "2d")]
    Adapter2d,
}

impl TrainStage {
    pub fn name(self) -> &'static str {
        match self {
            TrainStage::Base => "base",
            TrainStage::Adapter3d => "3d",
            TrainStage::Adapter2d => "2d",
        }
    }
}

/// Study switches. All false reproduces the full method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    /// Drop the global adapter entirely.
    pub no_3dga: bool,
    /// Keep the orthogonality term out of the objective (still logged).
    pub no_lo: bool,
    /// Keep the alignment term out of the stage-2 objective (still
    /// logged); also permits a cold start without a stage-1 state.
    pub no_l3d: bool,
    /// Freeze the global adapter during stage 2.
    pub freeze_3dga: bool,
    /// Train the stage-2 local student on 3D cues instead of 2D.
    pub use_3d_input: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the orthogonality term.
    pub lambda1: f64,
    /// Weight of the alignment term.
    pub lambda2: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs for the stage being run.
    pub epochs: usize,
    /// Upper bound of the per-clip masked-frame fraction.
    pub mask_ratio: f64,
    /// Lower bound of the per-clip masked-frame fraction.
    pub mask_ratio_min: f64,
    /// Probability of dropping the prompt to the null row during training.
    pub text_drop_prob: f64,
    /// Probability that an adapter training item omits the global branch,
    /// so the local branch learns to steer the base on its own (the only
    /// configuration guidance has at inference).
    pub global_drop_prob: f64,
    pub seed: u64,
    pub stage: TrainStage,
    pub ablation: AblationConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 0.01,
            lambda2: 10.0,
            learning_rate: 2e-4,
            batch_size: 64,
            epochs: 30,
            mask_ratio: 1.0,
            mask_ratio_min: 0.5,
            text_drop_prob: 0.1,
            global_drop_prob: 0.5,
            seed: 7,
            stage: TrainStage::Base,
            ablation: AblationConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1.is_finite() && self.lambda1 >= 0.0) {
            return Err(CoreError::Validation(format!(
                "lambda1 must be non-negative, got {}",
                self.lambda1
            )));
        }
        if !(self.lambda2.is_finite() && self.lambda2 >= 0.0) {
            return Err(CoreError::Validation(format!(
                "lambda2 must be non-negative, got {}",
                self.lambda2
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(CoreError::Validation(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(CoreError::Validation(
                "batch size and epochs must be at least 1".into(),
            ));
        }
        if !(self.mask_ratio > 0.0 && self.mask_ratio <= 1.0) {
            return Err(CoreError::Validation(format!(
                "mask ratio must be in (0, 1], got {}",
                self.mask_ratio
            )));
        }
        if !(self.mask_ratio_min > 0.0 && self.mask_ratio_min <= self.mask_ratio) {
            return Err(CoreError::Validation(format!(
                "mask ratio lower bound {} must be in (0, {}]",
                self.mask_ratio_min, self.mask_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.text_drop_prob) {
            return Err(CoreError::Validation(format!(
                "text drop probability must be in [0, 1], got {}",
                self.text_drop_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.global_drop_prob) {
            return Err(CoreError::Validation(format!(
                "global drop probability must be in [0, 1], got {}",
                self.global_drop_prob
            )));
        }
        Ok(())
    }
}

/// Guidance defaults used by sampling runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub cfg_motion: f64,
    pub cfg_text: f64,
    pub steps: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            cfg_motion: 2.0,
            cfg_text: 4.0,
            steps: 4,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfg_motion.is_finite() && self.cfg_text.is_finite()) {
            return Err(CoreError::Validation(
                "guidance scales must be finite".into(),
            ));
        }
        if self.steps == 0 {
            return Err(CoreError::Validation(
                "sampling needs at least one step".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a run needs, serialized into manifests and hashed for
/// provenance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub camera: CameraRanges,
    pub augment: AugmentConfig,
    pub sampling: SamplingConfig,
    pub contact: ContactModel,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model.width == 0 || self.model.blocks == 0 || self.model.n_max == 0 {
            return Err(CoreError::Validation(
                "model sizes must be at least 1".into(),
            ));
        }
        if self.model.vocab.is_empty() {
            return Err(CoreError::Validation("prompt vocabulary is empty".into()));
        }
        for pattern in Pattern::ALL {
            if !self.model.vocab.iter().any(|v| v == pattern.prompt()) {
                return Err(CoreError::Validation(format!(
                    "vocabulary is missing the '{}' prompt",
                    pattern.prompt()
                )));
            }
        }
        self.data.validate()?;
        self.train.validate()?;
        self.camera.validate()?;
        self.augment.validate()?;
        self.sampling.validate()?;
        self.contact.validate()?;
        let clip_frames = (self.data.clip_seconds * self.data.fps).round() as usize;
        if clip_frames > self.model.n_max {
            return Err(CoreError::Validation(format!(
                "clips of {clip_frames} frames exceed the model maximum {}",
                self.model.n_max
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization. Field order is struct
    /// declaration order, so the hash is stable for equal configs.
    pub fn config_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        sha256_bytes(text.as_bytes())
    }
}
