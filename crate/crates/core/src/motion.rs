//! Dense motion sequences: per-frame world-space joint positions.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::skeleton::Skeleton;

/// A motion clip: `frames[n][j]` is the world position of joint `j` at frame
/// `n`, in meters. The struct is its own JSON file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSequence {
    pub skeleton: Skeleton,
    pub fps: f64,
    pub frames: Vec<Vec<[f64; 3]>>,
}

impl MotionSequence {
    /// Number of frames.
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Clip length in seconds (`frames / fps`).
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    /// Position of joint `j` at frame `n`.
    pub fn joint(&self, n: usize, j: usize) -> [f64; 3] {
        self.frames[n][j]
    }

    /// Checks the clip invariants: a valid skeleton, `fps > 0`, at least two
    /// frames, every frame sized to the skeleton, and all coordinates finite.
    pub fn validate(&self) -> Result<()> {
        self.skeleton.validate()?;
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(CoreError::Validation(format!("fps must be positive, got {}", self.fps)));
        }
        if self.frames.len() < 2 {
            return Err(CoreError::Validation(format!(
                "motion needs at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        let joints = self.skeleton.joint_count();
        for (n, frame) in self.frames.iter().enumerate() {
            if frame.len() != joints {
                return Err(CoreError::ShapeMismatch(format!(
                    "frame {n} has {} joints, skeleton has {joints}",
                    frame.len()
                )));
            }
            for (j, p) in frame.iter().enumerate() {
                if !p.iter().all(|c| c.is_finite()) {
                    return Err(CoreError::Validation(format!(
                        "non-finite position at frame {n}, joint {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The root joint's world positions over time, used as the global condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootTrajectory {
    pub fps: f64,
    pub positions: Vec<[f64; 3]>,
}

/// Extracts the root joint column of `motion`.
pub fn root_trajectory(motion: &MotionSequence) -> RootTrajectory {
    let root = motion.skeleton.cue_joint(crate::skeleton::CueSlot::Root);
    RootTrajectory {
        fps: motion.fps,
        positions: motion.frames.iter().map(|frame| frame[root]).collect(),
    }
}

/// Linearly resamples `motion` to `target_fps`, keeping the clip duration.
///
/// Frame `i` of the output samples source time `i / target_fps`; interior
/// times interpolate between the two bracketing source frames and times past
/// the last source frame clamp to it. Resampling to the source rate returns
/// the input unchanged.
pub fn resample(motion: &MotionSequence, target_fps: f64) -> Result<MotionSequence> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(CoreError::Validation(format!(
            "target fps must be positive, got {target_fps}"
        )));
    }
    if target_fps == motion.fps {
        return Ok(motion.clone());
    }
    let n_src = motion.frames.len();
    let n_out = ((motion.duration() * target_fps).round() as usize).max(2);
    let joints = motion.skeleton.joint_count();
    let mut frames = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let t = i as f64 / target_fps * motion.fps;
        let lo = (t.floor() as usize).min(n_src - 1);
        let hi = (lo + 1).min(n_src - 1);
        let w = (t - lo as f64).clamp(0.0, 1.0);
        let mut frame = Vec::with_capacity(joints);
        for j in 0..joints {
            let a = motion.frames[lo][j];
            let b = motion.frames[hi][j];
            frame.push([
                a[0] + (b[0] - a[0]) * w,
                a[1] + (b[1] - a[1]) * w,
                a[2] + (b[2] - a[2]) * w,
            ]);
        }
        frames.push(frame);
    }
    Ok(MotionSequence {
        skeleton: motion.skeleton.clone(),
        fps: target_fps,
        frames,
    })
}
