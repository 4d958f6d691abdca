//! Procedural training and validation clip sets.
//!
//! Clips cycle through the motion patterns with per-clip amplitude and
//! period jitter so batches mix all patterns and no two clips are
//! identical. Derivation is by named substream, so a clip's content
//! depends only on (master seed, set label, clip index).

use rand::Rng;

use crate::config::DataConfig;
use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;
use crate::rng::{derive_seed, substream};
use crate::synth::{synth_motion, Pattern, SynthParams};

/// One training example: a motion, its pattern, and its prompt id.
#[derive(Debug, Clone)]
pub struct Clip {
    pub pattern: Pattern,
    pub text_id: usize,
    pub motion: MotionSequence,
}

#[derive(Debug, Clone)]
pub struct ClipSet {
    pub clips: Vec<Clip>,
}

impl ClipSet {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// Builds `count` clips cycling through the patterns. `label` separates
/// sets (training vs validation) drawn from the same master seed; the
/// prompt of every pattern must appear in `vocab`.
pub fn build_clipset(
    cfg: &DataConfig,
    vocab: &[String],
    master_seed: u64,
    label: &str,
    count: usize,
) -> Result<ClipSet> {
    cfg.validate()?;
    if count == 0 {
        return Err(CoreError::Validation("clip set would be empty".into()));
    }
    let mut clips = Vec::with_capacity(count);
    for i in 0..count {
        let pattern = Pattern::ALL[i % Pattern::ALL.len()];
        let text_id = vocab
            .iter()
            .position(|v| v == pattern.prompt())
            .ok_or_else(|| {
                CoreError::Validation(format!(
                    "prompt '{}' missing from the vocabulary",
                    pattern.prompt()
                ))
            })?;
        let mut jitter = substream(master_seed, label, i as u64);
        let defaults = SynthParams::defaults_for(pattern);
        let params = SynthParams {
            amplitude: defaults.amplitude * (0.85 + 0.3 * jitter.random::<f64>()),
            period: defaults.period * (0.9 + 0.2 * jitter.random::<f64>()),
            duration: cfg.clip_seconds,
            fps: cfg.fps,
        };
        let synth_seed = derive_seed(master_seed, label, (i as u64) | (1 << 63));
        let motion = synth_motion(pattern, &params, synth_seed)?;
        clips.push(Clip {
            pattern,
            text_id,
            motion,
        });
    }
    Ok(ClipSet { clips })
}
