//! Checkpoint files: everything needed to resume staged training or to
//! sample from a trained model.
//!
//! A checkpoint stores parameters and histories but not optimizer
//! moments; a stage restarted from a checkpoint begins with fresh
//! moments. The config hash records which configuration produced the
//! file so mismatched reuse is detectable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, TrainStage};
use crate::error::{CoreError, Result};
use crate::io::{load_json, save_json};
use crate::model::{AdapterKind, AdapterParams, GeneratorParams};
use crate::skeleton::Skeleton;
use crate::train::{LossRow, TrainState, ValRecord};

/// Bumped whenever the on-disk layout changes incompatibly.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub tool_version: String,
    pub stage: TrainStage,
    pub skeleton: Skeleton,
    pub fps: f64,
    pub config_hash: String,
    pub seed: u64,
    pub base: GeneratorParams,
    pub la3d: Option<AdapterParams>,
    /// Stage-two student; `Local3d` here means the 3D-input variant.
    pub la2d: Option<AdapterParams>,
    pub ga3d: Option<AdapterParams>,
    pub loss_history: Vec<LossRow>,
    pub val_history: Vec<ValRecord>,
}

impl Checkpoint {
    /// Snapshots a finished stage under `cfg`.
    pub fn from_state(state: &TrainState, cfg: &PipelineConfig) -> Checkpoint {
        Checkpoint {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            stage: state.stage,
            skeleton: Skeleton::default_humanoid(),
            fps: cfg.data.fps,
            config_hash: cfg.config_hash(),
            seed: cfg.train.seed,
            base: state.base.clone(),
            la3d: state.la3d.clone(),
            la2d: state.la2d.clone(),
            ga3d: state.ga3d.clone(),
            loss_history: state.loss_history.clone(),
            val_history: state.val_history.clone(),
        }
    }

    /// Rebuilds a [`TrainState`] with empty optimizer moments.
    pub fn to_state(&self) -> TrainState {
        TrainState {
            stage: self.stage,
            base: self.base.clone(),
            la3d: self.la3d.clone(),
            la2d: self.la2d.clone(),
            ga3d: self.ga3d.clone(),
            epoch: 0,
            step: self.loss_history.last().map_or(0, |r| r.step),
            loss_history: self.loss_history.clone(),
            val_history: self.val_history.clone(),
            moments: Default::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(CoreError::Validation(format!(
                "checkpoint format {} is not the supported {FORMAT_VERSION}",
                self.format_version
            )));
        }
        self.skeleton.validate()?;
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(CoreError::Validation(format!(
                "checkpoint fps must be positive, got {}",
                self.fps
            )));
        }
        self.base.validate()?;
        for (field, adapter, accepted) in [
            ("la3d", &self.la3d, &[AdapterKind::Local3d][..]),
            (
                "la2d",
                &self.la2d,
                &[AdapterKind::Local2d, AdapterKind::Local3d][..],
            ),
            ("ga3d", &self.ga3d, &[AdapterKind::Global3d][..]),
        ] {
            if let Some(a) = adapter {
                a.validate()?;
                if !accepted.contains(&a.kind) {
                    return Err(CoreError::Validation(format!(
                        "checkpoint field {field} holds a {} adapter",
                        a.kind.name()
                    )));
                }
                if a.dims != self.base.dims {
                    return Err(CoreError::ShapeMismatch(format!(
                        "adapter {field} dims do not match the generator"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    save_json(path, checkpoint)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let checkpoint: Checkpoint = load_json(path)?;
    checkpoint.validate()?;
    Ok(checkpoint)
}
