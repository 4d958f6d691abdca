//! Ingestion of third-party 2D keypoint tracks into the canonical sparse
//! cue layout.
//!
//! Raw tracks use pixel conventions (Y grows downward, absolute image
//! coordinates) and arbitrary joint naming. Mapping selects one source
//! keypoint per canonical slot, subtracts the root, flips Y to the
//! canonical Y-up frame, zeroes low-confidence entries, and normalizes.
//! The root must clear the confidence floor in every frame because every
//! other entry is expressed relative to it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{project_point, CameraTrack};
use crate::cues::{SparseCue2D, SparseCues};
use crate::error::{CoreError, Result};
use crate::io::load_json;
use crate::motion::MotionSequence;
use crate::skeleton::CueSlot;

/// A named 2D keypoint track in pixel conventions, as produced by common
/// pose estimators. `confidence` is optional; absent means fully trusted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawKeypointTrack {
    pub fps: f64,
    /// One name per keypoint column.
    pub names: Vec<String>,
    /// `points[frame][keypoint] = [x_px, y_px]`, Y growing downward.
    pub points: Vec<Vec<[f64; 2]>>,
    /// `confidence[frame][keypoint]` in `[0, 1]`, parallel to `points`.
    pub confidence: Option<Vec<Vec<f64>>>,
}

impl RawKeypointTrack {
    pub fn frame_count(&self) -> usize {
        self.points.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(CoreError::Validation(format!(
                "fps must be positive, got {}",
                self.fps
            )));
        }
        let k = self.names.len();
        if k == 0 {
            return Err(CoreError::Validation("track has no keypoints".into()));
        }
        if self.points.is_empty() {
            return Err(CoreError::Validation("track has no frames".into()));
        }
        for (n, row) in self.points.iter().enumerate() {
            if row.len() != k {
                return Err(CoreError::Validation(format!(
                    "frame {n} has {} keypoints, expected {k}",
                    row.len()
                )));
            }
        }
        if let Some(conf) = &self.confidence {
            if conf.len() != self.points.len() {
                return Err(CoreError::Validation(format!(
                    "confidence has {} frames, points have {}",
                    conf.len(),
                    self.points.len()
                )));
            }
            for (n, row) in conf.iter().enumerate() {
                if row.len() != k {
                    return Err(CoreError::Validation(format!(
                        "confidence frame {n} has {} entries, expected {k}",
                        row.len()
                    )));
                }
                for (i, &c) in row.iter().enumerate() {
                    if !(c.is_finite() && (0.0..=1.0).contains(&c)) {
                        return Err(CoreError::Validation(format!(
                            "confidence out of [0, 1] at frame {n}, keypoint {i}: {c}"
                        )));
                    }
                }
            }
        }
        // Coordinates only need to be finite where they will be read.
        for (n, row) in self.points.iter().enumerate() {
            for (i, p) in row.iter().enumerate() {
                let trusted = self
                    .confidence
                    .as_ref()
                    .map(|c| c[n][i] > 0.0)
                    .unwrap_or(true);
                if trusted && !(p[0].is_finite() && p[1].is_finite()) {
                    return Err(CoreError::Validation(format!(
                        "non-finite keypoint at frame {n}, keypoint {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn confidence_at(&self, frame: usize, keypoint: usize) -> f64 {
        self.confidence
            .as_ref()
            .map(|c| c[frame][keypoint])
            .unwrap_or(1.0)
    }
}

/// Loads and validates a [`RawKeypointTrack`] from JSON.
pub fn load_keypoints(path: &Path) -> Result<RawKeypointTrack> {
    let track: RawKeypointTrack = load_json(path)?;
    track.validate()?;
    Ok(track)
}

/// Maps canonical slot names to source keypoint names. Slots absent from
/// the map ingest as invalid; the root slot must be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    pub slots: BTreeMap<String, String>,
    /// Entries with confidence strictly below this become invalid.
    pub confidence_floor: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            slots: BTreeMap::new(),
            confidence_floor: 0.3,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_floor.is_finite() && (0.0..=1.0).contains(&self.confidence_floor)) {
            return Err(CoreError::Validation(format!(
                "confidence floor must be in [0, 1], got {}",
                self.confidence_floor
            )));
        }
        if !self.slots.contains_key(CueSlot::Root.name()) {
            return Err(CoreError::Validation(
                "mapping must bind the root slot".into(),
            ));
        }
        for slot in self.slots.keys() {
            if CueSlot::from_name(slot).is_none() {
                return Err(CoreError::Validation(format!(
                    "unknown canonical slot '{slot}'"
                )));
            }
        }
        Ok(())
    }
}

/// Returns a packaged mapping by name, currently `human17` (a common
/// 17-point human format) and `quadruped`.
pub fn builtin_mapping(name: &str) -> Option<MappingConfig> {
    let text = match name {
        "human17" => include_str!("../mappings/human17.json"),
        "quadruped" => include_str!("../mappings/quadruped.json"),
        _ => return None,
    };
    // Packaged files are fixed at build time; parse failure is a build bug.
    let map: MappingConfig =
        serde_json::from_str(text).expect("packaged mapping files are valid JSON");
    map.validate().expect("packaged mapping files are valid");
    Some(map)
}

/// Converts a raw pixel-space track into normalized canonical cues.
///
/// The root keypoint must clear the confidence floor in every frame; a
/// drop-out anywhere is an error because the remaining entries would lose
/// their reference point. Other slots degrade per frame to invalid.
pub fn map_to_canonical(track: &RawKeypointTrack, map: &MappingConfig) -> Result<SparseCue2D> {
    track.validate()?;
    map.validate()?;

    let mut slot_to_col: [Option<usize>; CueSlot::COUNT] = [None; CueSlot::COUNT];
    for (slot_name, source_name) in &map.slots {
        let slot = CueSlot::from_name(slot_name)
            .ok_or_else(|| CoreError::Validation(format!("unknown canonical slot '{slot_name}'")))?;
        let col = track
            .names
            .iter()
            .position(|n| n == source_name)
            .ok_or_else(|| {
                CoreError::Validation(format!(
                    "mapped keypoint '{source_name}' not present in track"
                ))
            })?;
        slot_to_col[slot.index()] = Some(col);
    }
    let root_col = slot_to_col[0].expect("validate checked the root binding");

    for n in 0..track.frame_count() {
        if track.confidence_at(n, root_col) < map.confidence_floor {
            return Err(CoreError::Validation(format!(
                "root keypoint below confidence floor {} at frame {n}",
                map.confidence_floor
            )));
        }
    }

    let mut cues = SparseCues::empty(track.fps, 0);
    for n in 0..track.frame_count() {
        let root = track.points[n][root_col];
        let mut frame = [[0.0_f64; 2]; CueSlot::COUNT];
        let mut valid = [false; CueSlot::COUNT];
        valid[0] = true;
        for s in 1..CueSlot::COUNT {
            let Some(col) = slot_to_col[s] else { continue };
            if track.confidence_at(n, col) < map.confidence_floor {
                continue;
            }
            let p = track.points[n][col];
            // Pixel Y grows downward; canonical cues are Y-up.
            frame[s] = [p[0] - root[0], -(p[1] - root[1])];
            valid[s] = true;
        }
        cues.cues.push(frame);
        cues.valid.push(valid);
    }
    cues.normalize();
    Ok(cues)
}

/// Renders a motion through a camera into a pixel-convention keypoint
/// track, the inverse direction of [`map_to_canonical`]. Keypoints take
/// the canonical slot names; confidence is omitted (fully trusted).
pub fn export_pixel_keypoints(
    motion: &MotionSequence,
    cam: &CameraTrack,
    pixel_scale: f64,
    image_center: [f64; 2],
) -> Result<RawKeypointTrack> {
    if !(pixel_scale.is_finite() && pixel_scale > 0.0) {
        return Err(CoreError::Validation(format!(
            "pixel scale must be positive, got {pixel_scale}"
        )));
    }
    motion.validate()?;
    if cam.poses.len() != motion.frame_count() {
        return Err(CoreError::ShapeMismatch(format!(
            "camera has {} poses, motion has {} frames",
            cam.poses.len(),
            motion.frame_count()
        )));
    }
    let cue_joints = motion.skeleton.cue_joints();
    let mut points = Vec::with_capacity(motion.frame_count());
    for (n, frame) in motion.frames.iter().enumerate() {
        let pose = &cam.poses[n];
        let mut row = Vec::with_capacity(CueSlot::COUNT);
        for (slot, &joint) in CueSlot::ALL.iter().zip(&cue_joints) {
            let v = pose.world_to_camera(frame[joint]);
            let uv = project_point(cam.focal, v[0], v[1], -v[2]).ok_or(
                CoreError::BehindCamera {
                    frame: n,
                    slot: slot.name(),
                },
            )?;
            row.push([
                image_center[0] + pixel_scale * uv[0],
                image_center[1] - pixel_scale * uv[1],
            ]);
        }
        points.push(row);
    }
    Ok(RawKeypointTrack {
        fps: motion.fps,
        names: CueSlot::ALL.iter().map(|s| s.name().to_string()).collect(),
        points,
        confidence: None,
    })
}
