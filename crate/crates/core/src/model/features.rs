//! Conversions between motions, pose-frame vectors, and per-frame
//! condition vectors.
//!
//! A pose frame is `[root xyz, then root-relative xyz for joints 1..J-1]`,
//! so `pose_dim = 3 * J`. Condition vectors flatten a cue frame (root
//! slot included) plus its validity flags, or the root displacement from
//! the clip's first frame for the global branch.

use crate::cues::{SparseCue2D, SparseCue3D};
use crate::error::{CoreError, Result};
use crate::motion::{MotionSequence, RootTrajectory};
use crate::skeleton::{CueSlot, Skeleton};

/// Per-frame condition length for 3D local cues: 10 slots x 3 coordinates
/// plus 10 validity flags.
pub const LOCAL_3D_COND_DIM: usize = CueSlot::COUNT * 3 + CueSlot::COUNT;
/// Per-frame condition length for 2D local cues: 10 slots x 2 coordinates
/// plus 10 validity flags.
pub const LOCAL_2D_COND_DIM: usize = CueSlot::COUNT * 2 + CueSlot::COUNT;
/// Per-frame condition length for the global branch: root displacement.
pub const GLOBAL_COND_DIM: usize = 3;

/// Flattened pose vector length for a skeleton.
pub fn pose_dim(skeleton: &Skeleton) -> usize {
    skeleton.joint_count() * 3
}

/// Flattens a motion into `N x pose_dim` frame vectors.
pub fn featurize(motion: &MotionSequence) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(motion.frame_count());
    for frame in &motion.frames {
        let root = frame[0];
        let mut v = Vec::with_capacity(frame.len() * 3);
        v.extend_from_slice(&root);
        for joint in frame.iter().skip(1) {
            v.push(joint[0] - root[0]);
            v.push(joint[1] - root[1]);
            v.push(joint[2] - root[2]);
        }
        out.push(v);
    }
    out
}

/// Rebuilds a motion from `N x pose_dim` frame vectors.
pub fn defeaturize(skeleton: &Skeleton, fps: f64, frames: &[Vec<f64>]) -> Result<MotionSequence> {
    let p = pose_dim(skeleton);
    let mut out_frames = Vec::with_capacity(frames.len());
    for (n, v) in frames.iter().enumerate() {
        if v.len() != p {
            return Err(CoreError::ShapeMismatch(format!(
                "frame {n} has {} values, pose dim is {p}",
                v.len()
            )));
        }
        let root = [v[0], v[1], v[2]];
        let mut frame = Vec::with_capacity(skeleton.joint_count());
        frame.push(root);
        for j in 1..skeleton.joint_count() {
            let o = j * 3;
            frame.push([root[0] + v[o], root[1] + v[o + 1], root[2] + v[o + 2]]);
        }
        out_frames.push(frame);
    }
    Ok(MotionSequence {
        skeleton: skeleton.clone(),
        fps,
        frames: out_frames,
    })
}

/// A borrowed condition for one adapter branch.
#[derive(Debug, Clone, Copy)]
pub enum ConditionRef<'a> {
    Local3d(&'a SparseCue3D),
    Local2d(&'a SparseCue2D),
    Global(&'a RootTrajectory),
}

impl ConditionRef<'_> {
    pub fn frame_count(&self) -> usize {
        match self {
            ConditionRef::Local3d(c) => c.frame_count(),
            ConditionRef::Local2d(c) => c.frame_count(),
            ConditionRef::Global(t) => t.positions.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConditionRef::Local3d(_) => "local_3d",
            ConditionRef::Local2d(_) => "local_2d",
            ConditionRef::Global(_) => "global_3d",
        }
    }
}

/// Flattens a condition into `N x cond_dim` vectors. Invalid cue entries
/// contribute zeros alongside a zero validity flag; the global condition
/// is the root displacement from the first frame.
pub fn cond_matrix(condition: &ConditionRef<'_>) -> (Vec<Vec<f64>>, usize) {
    match condition {
        ConditionRef::Local3d(cues) => {
            let mut out = Vec::with_capacity(cues.frame_count());
            for (frame, valid) in cues.cues.iter().zip(&cues.valid) {
                let mut v = Vec::with_capacity(LOCAL_3D_COND_DIM);
                for entry in frame {
                    v.extend_from_slice(entry);
                }
                for &flag in valid {
                    v.push(if flag { 1.0 } else { 0.0 });
                }
                out.push(v);
            }
            (out, LOCAL_3D_COND_DIM)
        }
        ConditionRef::Local2d(cues) => {
            let mut out = Vec::with_capacity(cues.frame_count());
            for (frame, valid) in cues.cues.iter().zip(&cues.valid) {
                let mut v = Vec::with_capacity(LOCAL_2D_COND_DIM);
                for entry in frame {
                    v.extend_from_slice(entry);
                }
                for &flag in valid {
                    v.push(if flag { 1.0 } else { 0.0 });
                }
                out.push(v);
            }
            (out, LOCAL_2D_COND_DIM)
        }
        ConditionRef::Global(traj) => {
            let origin = traj.positions.first().copied().unwrap_or([0.0; 3]);
            let out = traj
                .positions
                .iter()
                .map(|p| vec![p[0] - origin[0], p[1] - origin[1], p[2] - origin[2]])
                .collect();
            (out, GLOBAL_COND_DIM)
        }
    }
}
