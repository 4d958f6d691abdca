//! Sparse joint cues: the 10-slot, root-anchored, globally normalized
//! representation shared by the 2D and 3D conditioning paths.
//!
//! A cue track stores one entry per frame per [`CueSlot`], plus a validity
//! mask. Valid entries are root-relative; the root slot itself is pinned to
//! the origin, invalid entries are zero, and the whole sequence is scaled so
//! the L2 norm over every valid non-root entry is 1. A sequence whose valid
//! non-root entries are all zero (every cue joint sitting on the root) is
//! left unnormalized; that degenerate case carries no local signal.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;
use crate::skeleton::CueSlot;

/// Norms below this are treated as zero when normalizing or comparing
/// directions.
pub const NORM_EPS: f64 = 1e-12;

/// Tolerance on the unit-norm invariant.
pub const NORM_TOL: f64 = 1e-9;

/// A sparse cue track in `D` dimensions (2 for image-plane cues, 3 for
/// world-space cues). `cues[n][s]` belongs to frame `n`, slot `s` in
/// [`CueSlot`] storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCues<const D: usize> {
    pub fps: f64,
    pub cues: Vec<[[f64; D]; CueSlot::COUNT]>,
    pub valid: Vec<[bool; CueSlot::COUNT]>,
}

/// World-space cues (condition for the 3D local branch).
pub type SparseCue3D = SparseCues<3>;

/// Image-plane cues (condition for the 2D local branch).
pub type SparseCue2D = SparseCues<2>;

/// On-disk shape of a cue file; `dims` disambiguates 2D from 3D.
#[derive(Serialize, Deserialize)]
struct CueFileRepr {
    fps: f64,
    dims: usize,
    cues: Vec<Vec<Vec<f64>>>,
    valid: Vec<Vec<bool>>,
}

impl<const D: usize> SparseCues<D> {
    /// An all-invalid, all-zero track of `frames` frames.
    pub fn empty(fps: f64, frames: usize) -> Self {
        SparseCues {
            fps,
            cues: vec![[[0.0; D]; CueSlot::COUNT]; frames],
            valid: vec![[false; CueSlot::COUNT]; frames],
        }
    }

    /// Number of frames.
    pub fn frame_count(&self) -> usize {
        self.cues.len()
    }

    /// Number of valid entries across the track.
    pub fn valid_count(&self) -> usize {
        self.valid.iter().flatten().filter(|v| **v).count()
    }

    /// L2 norm over all valid non-root entries of the whole sequence.
    pub fn global_norm(&self) -> f64 {
        let mut sum = 0.0;
        for (frame, valid) in self.cues.iter().zip(&self.valid) {
            for s in 1..CueSlot::COUNT {
                if valid[s] {
                    for c in frame[s] {
                        sum += c * c;
                    }
                }
            }
        }
        sum.sqrt()
    }

    /// Scales valid non-root entries so [`Self::global_norm`] becomes 1.
    ///
    /// A degenerate track (norm below [`NORM_EPS`]) is left untouched; the
    /// root slot and invalid entries are zero before and after.
    pub fn normalize(&mut self) {
        let norm = self.global_norm();
        if norm < NORM_EPS {
            return;
        }
        for (frame, valid) in self.cues.iter_mut().zip(&self.valid) {
            for s in 1..CueSlot::COUNT {
                if valid[s] {
                    for c in frame[s].iter_mut() {
                        *c /= norm;
                    }
                }
            }
        }
    }

    /// True when the unit-norm invariant holds (or the track is degenerate).
    pub fn is_normalized(&self) -> bool {
        let norm = self.global_norm();
        norm < NORM_EPS || (norm - 1.0).abs() <= NORM_TOL
    }

    /// Checks structural soundness: positive fps, aligned `cues`/`valid`
    /// lengths, finite coordinates. Normative invariants (root anchoring,
    /// unit norm, zero padding) are diagnosed by [`validate_cues`] instead so
    /// damaged files can still be loaded and inspected.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(CoreError::Validation(format!(
                "cue fps must be positive, got {}",
                self.fps
            )));
        }
        if self.cues.len() != self.valid.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "{} cue frames vs {} valid frames",
                self.cues.len(),
                self.valid.len()
            )));
        }
        for (n, frame) in self.cues.iter().enumerate() {
            for (s, entry) in frame.iter().enumerate() {
                if !entry.iter().all(|c| c.is_finite()) {
                    return Err(CoreError::Validation(format!(
                        "non-finite cue at frame {n}, slot {:?}",
                        CueSlot::ALL[s].name()
                    )));
                }
            }
        }
        Ok(())
    }

    fn from_repr(repr: CueFileRepr) -> Result<Self> {
        if repr.dims != D {
            return Err(CoreError::ShapeMismatch(format!(
                "cue file has dims={}, expected {D}",
                repr.dims
            )));
        }
        if repr.cues.len() != repr.valid.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "{} cue frames vs {} valid frames",
                repr.cues.len(),
                repr.valid.len()
            )));
        }
        let mut cues = Vec::with_capacity(repr.cues.len());
        for (n, frame) in repr.cues.iter().enumerate() {
            if frame.len() != CueSlot::COUNT {
                return Err(CoreError::ShapeMismatch(format!(
                    "frame {n} has {} slots, expected {}",
                    frame.len(),
                    CueSlot::COUNT
                )));
            }
            let mut row = [[0.0; D]; CueSlot::COUNT];
            for (s, entry) in frame.iter().enumerate() {
                if entry.len() != D {
                    return Err(CoreError::ShapeMismatch(format!(
                        "frame {n} slot {s} has {} components, expected {D}",
                        entry.len()
                    )));
                }
                row[s].copy_from_slice(entry);
            }
            cues.push(row);
        }
        let mut valid = Vec::with_capacity(repr.valid.len());
        for (n, frame) in repr.valid.iter().enumerate() {
            if frame.len() != CueSlot::COUNT {
                return Err(CoreError::ShapeMismatch(format!(
                    "valid row {n} has {} slots, expected {}",
                    frame.len(),
                    CueSlot::COUNT
                )));
            }
            let mut row = [false; CueSlot::COUNT];
            row.copy_from_slice(frame);
            valid.push(row);
        }
        let out = SparseCues {
            fps: repr.fps,
            cues,
            valid,
        };
        out.validate()?;
        Ok(out)
    }

    fn to_repr(&self) -> CueFileRepr {
        CueFileRepr {
            fps: self.fps,
            dims: D,
            cues: self
                .cues
                .iter()
                .map(|frame| frame.iter().map(|entry| entry.to_vec()).collect())
                .collect(),
            valid: self.valid.iter().map(|row| row.to_vec()).collect(),
        }
    }
}

impl<const D: usize> Serialize for SparseCues<D> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_repr().serialize(serializer)
    }
}

impl<'de, const D: usize> Deserialize<'de> for SparseCues<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> std::result::Result<Self, De::Error> {
        let repr = CueFileRepr::deserialize(deserializer)?;
        SparseCues::from_repr(repr).map_err(De::Error::custom)
    }
}

/// Extracts normalized 3D cues from a motion clip.
///
/// Selects the ten cue joints, subtracts the per-frame root position, pins
/// the root slot to exactly zero, marks every slot valid, and applies the
/// sequence-global normalization.
pub fn extract_cues_3d(motion: &MotionSequence) -> SparseCue3D {
    let joints = motion.skeleton.cue_joints();
    let mut out = SparseCue3D::empty(motion.fps, motion.frame_count());
    for (n, frame) in motion.frames.iter().enumerate() {
        let root = frame[joints[0]];
        for s in 1..CueSlot::COUNT {
            let p = frame[joints[s]];
            out.cues[n][s] = [p[0] - root[0], p[1] - root[1], p[2] - root[2]];
        }
        out.valid[n] = [true; CueSlot::COUNT];
    }
    out.normalize();
    out
}

/// Per-slot diagnostics from [`validate_cues`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlotDiagnostics {
    pub slot: String,
    pub valid_frames: usize,
    pub validity_rate: f64,
    /// Largest displacement between consecutive valid frames of this slot.
    pub max_step: f64,
    /// Frame index the largest step lands on (0 when no step exists).
    pub max_step_frame: usize,
    /// True when `max_step` exceeds the configured displacement threshold.
    pub step_outlier: bool,
}

/// Diagnostics report over a cue track; serializable as-is.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CueReport {
    pub frames: usize,
    pub dims: usize,
    pub valid_entries: usize,
    pub global_norm: f64,
    /// Unit global norm within tolerance, or degenerate all-zero.
    pub normalized: bool,
    /// Root slot exactly zero wherever valid.
    pub root_anchored: bool,
    /// Invalid entries exactly zero.
    pub padding_clean: bool,
    /// Largest absolute coordinate over valid entries.
    pub max_abs: f64,
    pub displacement_threshold: f64,
    pub slots: Vec<SlotDiagnostics>,
    /// Human-readable invariant violations; empty for a clean track.
    pub violations: Vec<String>,
}

impl CueReport {
    /// True when no invariant violation was found (displacement outliers are
    /// warnings, not violations).
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn dist<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Inspects a cue track against the representation invariants.
///
/// Reports root anchoring, unit-norm status, padding hygiene, coordinate
/// bounds, per-slot validity rates, and per-slot maximum inter-frame
/// displacement (a screen for tracking teleports). Steps larger than
/// `displacement_threshold` are flagged as outliers. Never fails; damaged
/// tracks yield populated `violations`.
pub fn validate_cues<const D: usize>(
    cues: &SparseCues<D>,
    displacement_threshold: f64,
) -> CueReport {
    let mut violations = Vec::new();
    let mut root_anchored = true;
    let mut padding_clean = true;
    let mut max_abs: f64 = 0.0;

    for (n, (frame, valid)) in cues.cues.iter().zip(&cues.valid).enumerate() {
        for s in 0..CueSlot::COUNT {
            let entry = &frame[s];
            if valid[s] {
                for c in entry {
                    max_abs = max_abs.max(c.abs());
                }
            }
            if s == 0 && valid[0] && entry.iter().any(|c| *c != 0.0) {
                root_anchored = false;
                violations.push(format!("root slot not anchored at zero in frame {n}"));
            }
            if !valid[s] && entry.iter().any(|c| *c != 0.0) {
                padding_clean = false;
                violations.push(format!(
                    "invalid slot {:?} is nonzero in frame {n}",
                    CueSlot::ALL[s].name()
                ));
            }
        }
    }

    let global_norm = cues.global_norm();
    let normalized = cues.is_normalized();
    if !normalized {
        violations.push(format!(
            "global norm {global_norm} differs from 1 by more than {NORM_TOL}"
        ));
    }

    let frames = cues.frame_count();
    let mut slots = Vec::with_capacity(CueSlot::COUNT);
    for slot in CueSlot::ALL {
        let s = slot.index();
        let valid_frames = (0..frames).filter(|&n| cues.valid[n][s]).count();
        let mut max_step = 0.0;
        let mut max_step_frame = 0;
        let mut prev: Option<(usize, &[f64; D])> = None;
        for n in 0..frames {
            if !cues.valid[n][s] {
                continue;
            }
            // Steps are measured between consecutive valid frames only;
            // invalid gaps are skipped, not bridged.
            if let Some((pn, p)) = prev {
                if n == pn + 1 {
                    let step = dist(p, &cues.cues[n][s]);
                    if step > max_step {
                        max_step = step;
                        max_step_frame = n;
                    }
                }
            }
            prev = Some((n, &cues.cues[n][s]));
        }
        slots.push(SlotDiagnostics {
            slot: slot.name().to_string(),
            valid_frames,
            validity_rate: if frames == 0 {
                0.0
            } else {
                valid_frames as f64 / frames as f64
            },
            max_step,
            max_step_frame,
            step_outlier: max_step > displacement_threshold,
        });
    }

    CueReport {
        frames,
        dims: D,
        valid_entries: cues.valid_count(),
        global_norm,
        normalized,
        root_anchored,
        padding_clean,
        max_abs,
        displacement_threshold,
        slots,
        violations,
    }
}
