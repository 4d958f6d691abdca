//! Physical plausibility metrics for generated motion.
//!
//! All four metrics read the toe joints through the foot cue slots, use
//! the vertical (y) axis for heights, and the horizontal (xz) plane for
//! travel, so they are invariant to horizontal translation of the whole
//! clip. Heights compare strictly against the thresholds: a toe exactly
//! at `contact_height` is not in contact, a toe exactly at
//! `float_height` is not floating.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;
use crate::skeleton::CueSlot;

/// Thresholds for the contact-based metrics, in meters and meters per
/// second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactModel {
    /// A toe below this height is in ground contact.
    pub contact_height: f64,
    /// An in-contact toe moving faster than this horizontally is skating.
    pub skate_speed: f64,
    /// Both toes above this height counts as a floating frame.
    pub float_height: f64,
}

impl Default for ContactModel {
    fn default() -> Self {
        ContactModel {
            contact_height: 0.05,
            skate_speed: 0.10,
            float_height: 0.05,
        }
    }
}

impl ContactModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("contact_height", self.contact_height),
            ("skate_speed", self.skate_speed),
            ("float_height", self.float_height),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CoreError::Validation(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Metric values for one clip, together with the thresholds that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fps: f64,
    pub frames: usize,
    pub contact: ContactModel,
    /// Mean third-difference magnitude scaled by fps cubed, averaged
    /// over joints; a smoothness proxy in meters per second cubed.
    pub jitter: f64,
    /// Fraction of frame transitions where an in-contact foot slides
    /// faster than the skate threshold.
    pub fsr: f64,
    /// Fraction of frames with both feet strictly above the float
    /// height.
    pub ffl: f64,
    /// Total in-contact horizontal foot travel per second of clip.
    pub fsd: f64,
}

/// Relative gaps between a candidate report and a reference one, one
/// value per metric: `|candidate - reference| / max(reference, 1e-9)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeMetrics {
    pub r_jitter: f64,
    pub r_fsr: f64,
    pub r_ffl: f64,
    pub r_fsd: f64,
}

fn relative(candidate: f64, reference: f64) -> f64 {
    (candidate - reference).abs() / reference.max(1e-9)
}

/// Per-metric relative gaps of `candidate` against `reference`.
pub fn relative_metrics(candidate: &MetricReport, reference: &MetricReport) -> RelativeMetrics {
    RelativeMetrics {
        r_jitter: relative(candidate.jitter, reference.jitter),
        r_fsr: relative(candidate.fsr, reference.fsr),
        r_ffl: relative(candidate.ffl, reference.ffl),
        r_fsd: relative(candidate.fsd, reference.fsd),
    }
}

fn xz_step(a: [f64; 3], b: [f64; 3]) -> f64 {
    let (dx, dz) = (b[0] - a[0], b[2] - a[2]);
    (dx * dx + dz * dz).sqrt()
}

/// Computes all four metrics for `motion`. Needs at least 4 frames (the
/// jitter stencil spans four).
pub fn compute_metrics(motion: &MotionSequence, contact: &ContactModel) -> Result<MetricReport> {
    motion.validate()?;
    contact.validate()?;
    let n = motion.frame_count();
    if n < 4 {
        return Err(CoreError::Validation(format!(
            "metrics need at least 4 frames, got {n}"
        )));
    }
    let fps = motion.fps;
    let joints = motion.skeleton.joint_count();

    // Jitter: mean over (window, joint) of the third-difference norm.
    let mut jitter_acc = 0.0;
    for w in 0..n - 3 {
        for j in 0..joints {
            let (p0, p1, p2, p3) = (
                motion.frames[w][j],
                motion.frames[w + 1][j],
                motion.frames[w + 2][j],
                motion.frames[w + 3][j],
            );
            let mut sq = 0.0;
            for c in 0..3 {
                // Nested-difference form of the third difference; a
                // constant track cancels to exactly zero.
                let d = (p3[c] - p2[c]) - 2.0 * (p2[c] - p1[c]) + (p1[c] - p0[c]);
                sq += d * d;
            }
            jitter_acc += sq.sqrt();
        }
    }
    let jitter = fps.powi(3) * jitter_acc / ((n - 3) as f64 * joints as f64);

    let feet = [
        motion.skeleton.cue_joint(CueSlot::LeftFoot),
        motion.skeleton.cue_joint(CueSlot::RightFoot),
    ];
    let in_contact = |frame: usize, foot: usize| motion.frames[frame][foot][1] < contact.contact_height;

    // Skate ratio: transitions where a foot keeps contact and slides.
    let mut flagged = 0usize;
    for t in 1..n {
        let skating = feet.iter().any(|&foot| {
            in_contact(t - 1, foot)
                && in_contact(t, foot)
                && xz_step(motion.frames[t - 1][foot], motion.frames[t][foot]) * fps
                    > contact.skate_speed
        });
        if skating {
            flagged += 1;
        }
    }
    let fsr = flagged as f64 / (n - 1) as f64;

    // Float ratio: frames with both feet strictly above the threshold.
    let floating = (0..n)
        .filter(|&t| {
            feet.iter()
                .all(|&foot| motion.frames[t][foot][1] > contact.float_height)
        })
        .count();
    let ffl = floating as f64 / n as f64;

    // Slide distance: in-contact horizontal travel per second.
    let mut slide = 0.0;
    for t in 1..n {
        for &foot in &feet {
            if in_contact(t - 1, foot) && in_contact(t, foot) {
                slide += xz_step(motion.frames[t - 1][foot], motion.frames[t][foot]);
            }
        }
    }
    let fsd = slide / motion.duration();

    Ok(MetricReport {
        fps,
        frames: n,
        contact: *contact,
        jitter,
        fsr,
        ffl,
        fsd,
    })
}
