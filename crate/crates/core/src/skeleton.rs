//! Humanoid rig description and the canonical sparse-cue slots.
//!
//! The pipeline runs on positions only: a skeleton is a named joint tree with
//! no bone lengths or rotations. Ten canonical cue slots pick out the joints
//! a user may pin (root, head, elbows, hands, knees, feet); every cue track
//! in the crate is indexed by [`CueSlot`] order, with the root always at
//! slot 0.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Joint count of the built-in humanoid rig.
pub const JOINT_COUNT: usize = 22;

/// The ten canonical cue slots, in storage order.
///
/// `Root` is always slot 0; cue extraction anchors it at the origin and every
/// other slot is stored relative to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CueSlot {
    Root,
    Head,
    LeftElbow,
    RightElbow,
    LeftHand,
    RightHand,
    LeftKnee,
    RightKnee,
    LeftFoot,
    RightFoot,
}

impl CueSlot {
    /// Number of slots.
    pub const COUNT: usize = 10;

    /// All slots in storage order.
    pub const ALL: [CueSlot; CueSlot::COUNT] = [
        CueSlot::Root,
        CueSlot::Head,
        CueSlot::LeftElbow,
        CueSlot::RightElbow,
        CueSlot::LeftHand,
        CueSlot::RightHand,
        CueSlot::LeftKnee,
        CueSlot::RightKnee,
        CueSlot::LeftFoot,
        CueSlot::RightFoot,
    ];

    /// Storage index of this slot.
    pub fn index(self) -> usize {
        self as usize
    }

    /// Stable snake_case name used in files and mappings.
    pub fn name(self) -> &'static str {
        match self {
            CueSlot::Root => "root",
            CueSlot::Head => "head",
            CueSlot::LeftElbow => "left_elbow",
            CueSlot::RightElbow => "right_elbow",
            CueSlot::LeftHand => "left_hand",
            CueSlot::RightHand => "right_hand",
            CueSlot::LeftKnee => "left_knee",
            CueSlot::RightKnee => "right_knee",
            CueSlot::LeftFoot => "left_foot",
            CueSlot::RightFoot => "right_foot",
        }
    }

    /// Inverse of [`CueSlot::name`].
    pub fn from_name(name: &str) -> Option<CueSlot> {
        CueSlot::ALL.into_iter().find(|slot| slot.name() == name)
    }
}

/// A joint tree plus the cue-slot assignment.
///
/// `parents[j]` is the parent joint index, or `-1` for the single root.
/// `cue_slots` maps each canonical slot name to a joint index. The struct is
/// its own file format; see [`Skeleton::validate`] for the invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joint_names: Vec<String>,
    pub parents: Vec<i64>,
    pub cue_slots: BTreeMap<String, usize>,
}

impl Skeleton {
    /// Number of joints.
    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    /// Parent of joint `j`, or `None` for the root.
    pub fn parent_of(&self, j: usize) -> Option<usize> {
        let p = self.parents[j];
        (p >= 0).then(|| p as usize)
    }

    /// Index of the joint named `name`.
    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Joint index bound to `slot`.
    ///
    /// Panics if the skeleton has not passed [`Skeleton::validate`]; every
    /// validated skeleton binds all ten slots.
    pub fn cue_joint(&self, slot: CueSlot) -> usize {
        self.cue_slots[slot.name()]
    }

    /// Joint indices for all slots, in [`CueSlot`] storage order.
    pub fn cue_joints(&self) -> [usize; CueSlot::COUNT] {
        let mut out = [0; CueSlot::COUNT];
        for slot in CueSlot::ALL {
            out[slot.index()] = self.cue_joint(slot);
        }
        out
    }

    /// Checks the structural invariants:
    ///
    /// * joint names are nonempty and unique, `parents` matches in length;
    /// * exactly one root (`-1`), every other parent is a valid index and the
    ///   parent pointers form a tree (no cycles);
    /// * `cue_slots` binds exactly the ten canonical names to distinct
    ///   joints, with the `root` slot on the root joint.
    pub fn validate(&self) -> Result<()> {
        let n = self.joint_names.len();
        if n == 0 {
            return Err(CoreError::Validation("skeleton has no joints".into()));
        }
        if self.parents.len() != n {
            return Err(CoreError::ShapeMismatch(format!(
                "skeleton has {n} joint names but {} parent entries",
                self.parents.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for name in &self.joint_names {
            if name.is_empty() {
                return Err(CoreError::Validation("empty joint name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(CoreError::Validation(format!("duplicate joint name {name:?}")));
            }
        }

        let mut root = None;
        for (j, &p) in self.parents.iter().enumerate() {
            if p == -1 {
                if let Some(first) = root {
                    return Err(CoreError::Validation(format!(
                        "multiple root joints: {first} and {j}"
                    )));
                }
                root = Some(j);
            } else if p < 0 || p as usize >= n {
                return Err(CoreError::Validation(format!(
                    "joint {j} has out-of-range parent {p}"
                )));
            } else if p as usize == j {
                return Err(CoreError::Validation(format!("joint {j} is its own parent")));
            }
        }
        let root = root.ok_or_else(|| CoreError::Validation("skeleton has no root joint".into()))?;
        for j in 0..n {
            // A walk of more than n hops means the parent pointers loop.
            let mut cursor = j;
            for _ in 0..=n {
                match self.parent_of(cursor) {
                    Some(p) => cursor = p,
                    None => break,
                }
            }
            if self.parent_of(cursor).is_some() {
                return Err(CoreError::Validation(format!(
                    "parent pointers of joint {j} form a cycle"
                )));
            }
        }

        if self.cue_slots.len() != CueSlot::COUNT {
            return Err(CoreError::Validation(format!(
                "expected {} cue slots, found {}",
                CueSlot::COUNT,
                self.cue_slots.len()
            )));
        }
        let mut bound = BTreeSet::new();
        for slot in CueSlot::ALL {
            let joint = *self.cue_slots.get(slot.name()).ok_or_else(|| {
                CoreError::Validation(format!("missing cue slot {:?}", slot.name()))
            })?;
            if joint >= n {
                return Err(CoreError::Validation(format!(
                    "cue slot {:?} points at joint {joint}, skeleton has {n}",
                    slot.name()
                )));
            }
            if !bound.insert(joint) {
                return Err(CoreError::Validation(format!(
                    "cue slot {:?} reuses joint {joint}",
                    slot.name()
                )));
            }
        }
        if self.cue_slots["root"] != root {
            return Err(CoreError::Validation(format!(
                "root cue slot must sit on the root joint {root}, found {}",
                self.cue_slots["root"]
            )));
        }
        Ok(())
    }

    /// The built-in 22-joint humanoid used by the synthesizer.
    ///
    /// Pelvis-rooted, with a three-segment spine, collar bones, and toe
    /// joints; the foot cue slots sit on the toes so ground contact is
    /// measured at the front of the foot.
    pub fn default_humanoid() -> Skeleton {
        let joints: [(&str, i64); JOINT_COUNT] = [
            ("pelvis", -1),
            ("left_hip", 0),
            ("right_hip", 0),
            ("spine1", 0),
            ("left_knee", 1),
            ("right_knee", 2),
            ("spine2", 3),
            ("left_ankle", 4),
            ("right_ankle", 5),
            ("spine3", 6),
            ("left_foot", 7),
            ("right_foot", 8),
            ("neck", 9),
            ("left_collar", 9),
            ("right_collar", 9),
            ("head", 12),
            ("left_shoulder", 13),
            ("right_shoulder", 14),
            ("left_elbow", 16),
            ("right_elbow", 17),
            ("left_wrist", 18),
            ("right_wrist", 19),
        ];
        let joint_names: Vec<String> = joints.iter().map(|(n, _)| n.to_string()).collect();
        let parents = joints.iter().map(|&(_, p)| p).collect();
        let cue_slots = [
            ("root", "pelvis"),
            ("head", "head"),
            ("left_elbow", "left_elbow"),
            ("right_elbow", "right_elbow"),
            ("left_hand", "left_wrist"),
            ("right_hand", "right_wrist"),
            ("left_knee", "left_knee"),
            ("right_knee", "right_knee"),
            ("left_foot", "left_foot"),
            ("right_foot", "right_foot"),
        ]
        .into_iter()
        .map(|(slot, joint)| {
            let index = joint_names.iter().position(|n| n == joint).unwrap();
            (slot.to_string(), index)
        })
        .collect();
        Skeleton {
            joint_names,
            parents,
            cue_slots,
        }
    }
}

/// Rest pose of [`Skeleton::default_humanoid`], in meters.
///
/// World frame: Y up, Z forward (facing direction), X toward the subject's
/// left; the ground is the Y=0 plane and toes rest at 2 cm.
pub fn default_rest_pose() -> Vec<[f64; 3]> {
    vec![
        [0.00, 0.95, 0.00],   // pelvis
        [0.09, 0.90, 0.00],   // left_hip
        [-0.09, 0.90, 0.00],  // right_hip
        [0.00, 1.05, 0.00],   // spine1
        [0.10, 0.50, 0.00],   // left_knee
        [-0.10, 0.50, 0.00],  // right_knee
        [0.00, 1.16, 0.00],   // spine2
        [0.10, 0.08, -0.03],  // left_ankle
        [-0.10, 0.08, -0.03], // right_ankle
        [0.00, 1.27, 0.00],   // spine3
        [0.10, 0.02, 0.10],   // left_foot
        [-0.10, 0.02, 0.10],  // right_foot
        [0.00, 1.42, 0.00],   // neck
        [0.04, 1.37, 0.00],   // left_collar
        [-0.04, 1.37, 0.00],  // right_collar
        [0.00, 1.56, 0.00],   // head
        [0.18, 1.36, 0.00],   // left_shoulder
        [-0.18, 1.36, 0.00],  // right_shoulder
        [0.23, 1.09, 0.01],   // left_elbow
        [-0.23, 1.09, 0.01],  // right_elbow
        [0.25, 0.84, 0.02],   // left_wrist
        [-0.25, 0.84, 0.02],  // right_wrist
    ]
}
