//! Intuitive whole-clip edits: vertical root scaling and arm spread.
//!
//! Both edits are deterministic geometric rewrites, designed so that simple
//! laws hold exactly: vertical scaling composes multiplicatively
//! (`scale(a*b) == scale(a) then scale(b)`), and setting the arm spread to
//! its current value is the identity.

use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;

/// Scales each frame's vertical root displacement about the sequence-minimum
/// root height by `scale`, translating the whole body rigidly with the root
/// so the local pose is untouched.
///
/// A clip with constant root height is a fixed point for every scale, and
/// the frame attaining the minimum never moves.
pub fn edit_root_vertical(motion: &MotionSequence, scale: f64) -> Result<MotionSequence> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(CoreError::Validation(format!(
            "root vertical scale must be positive, got {scale}"
        )));
    }
    if scale == 1.0 {
        return Ok(motion.clone());
    }
    let root = motion.skeleton.cue_joint(crate::skeleton::CueSlot::Root);
    let y_min = motion
        .frames
        .iter()
        .map(|f| f[root][1])
        .fold(f64::INFINITY, f64::min);

    let mut out = motion.clone();
    for frame in &mut out.frames {
        let lift = (frame[root][1] - y_min) * (scale - 1.0);
        for p in frame.iter_mut() {
            p[1] += lift;
        }
    }
    Ok(out)
}

struct ArmChain {
    shoulder: usize,
    elbow: usize,
    wrist: usize,
    /// +1 for the left arm, -1 for the right; spread opens toward this side.
    side: f64,
}

fn arm_chains(motion: &MotionSequence) -> Result<[ArmChain; 2]> {
    let joint = |name: &str| -> Result<usize> {
        motion.skeleton.joint_index(name).ok_or_else(|| {
            CoreError::Validation(format!("arm edit requires a joint named {name:?}"))
        })
    };
    Ok([
        ArmChain {
            shoulder: joint("left_shoulder")?,
            elbow: joint("left_elbow")?,
            wrist: joint("left_wrist")?,
            side: 1.0,
        },
        ArmChain {
            shoulder: joint("right_shoulder")?,
            elbow: joint("right_elbow")?,
            wrist: joint("right_wrist")?,
            side: -1.0,
        },
    ])
}

/// Sets both arms' horizontal spread angle to `angle_deg`.
///
/// The spread is the angle between the upper arm (elbow minus shoulder,
/// projected to the horizontal plane) and the forward +Z axis, measured
/// toward the arm's own side; 0 means arms forward, 90 means straight out.
/// Each arm's elbow and wrist rotate rigidly about the vertical axis through
/// its shoulder, so heights and arm shape are preserved. Frames where an
/// upper arm is vertical (no horizontal direction) are left unchanged for
/// that arm. Legs, torso, and head are never touched.
pub fn edit_arm_spread(motion: &MotionSequence, angle_deg: f64) -> Result<MotionSequence> {
    if !(angle_deg.is_finite() && angle_deg.abs() <= 180.0) {
        return Err(CoreError::Validation(format!(
            "arm spread must be within [-180, 180] degrees, got {angle_deg}"
        )));
    }
    let chains = arm_chains(motion)?;
    let target = angle_deg * PI / 180.0;

    let mut out = motion.clone();
    for frame in &mut out.frames {
        for chain in &chains {
            let s = frame[chain.shoulder];
            let a = [
                frame[chain.elbow][0] - s[0],
                frame[chain.elbow][2] - s[2],
            ];
            let horizontal = (a[0] * a[0] + a[1] * a[1]).sqrt();
            if horizontal < 1e-9 {
                continue;
            }
            let current = (chain.side * a[0]).atan2(a[1]);
            let beta = chain.side * (target - current);
            let (sin_b, cos_b) = beta.sin_cos();
            for j in [chain.elbow, chain.wrist] {
                let dx = frame[j][0] - s[0];
                let dz = frame[j][2] - s[2];
                // Rotation about +Y through the shoulder: for the left arm a
                // positive beta opens the spread, mirrored on the right.
                frame[j][0] = s[0] + dx * cos_b + dz * sin_b;
                frame[j][2] = s[2] - dx * sin_b + dz * cos_b;
            }
        }
    }
    Ok(out)
}
