//! Shared proptest strategies for the crate's property tests.

use proptest::prelude::*;

use crate::motion::MotionSequence;
use crate::skeleton::{Skeleton, JOINT_COUNT};

/// Arbitrary joint-position sequences on the default rig: coordinates are
/// bounded but otherwise unconstrained, so properties proven over them hold
/// for degenerate poses too (coincident joints, feet underground).
pub fn arb_motion() -> impl Strategy<Value = MotionSequence> {
    let frame = proptest::collection::vec([-5.0..5.0f64; 3], JOINT_COUNT);
    (proptest::collection::vec(frame, 4..10), 5.0..60.0f64).prop_map(|(frames, fps)| {
        MotionSequence {
            skeleton: Skeleton::default_humanoid(),
            fps,
            frames,
        }
    })
}
