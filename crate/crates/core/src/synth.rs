//! Procedural training clips: walk, jump, sway, and static patterns.
//!
//! These stand in for captured data, so what matters is not realism but
//! controllable structure: every pattern is a closed-form function of time
//! with documented invariants (grounded stance feet, exact jump amplitude,
//! planted feet during sway) that the metrics and trainer tests rely on.
//! The seed jitters style parameters only (bob, sway, arm swing, phases
//! where allowed); the amplitude/period contract of each pattern is exact.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;
use crate::rng::substream;
use crate::skeleton::{default_rest_pose, Skeleton, JOINT_COUNT};

/// Height of a planted toe, in meters. Kept well below the default contact
/// threshold (0.05 m) so stance frames always register as contact.
pub const STANCE_TOE_HEIGHT: f64 = 0.02;

/// Fraction of the gait cycle each foot spends planted.
pub const WALK_STANCE_FRACTION: f64 = 0.6;

/// Peak toe lift during walk swing, in meters.
pub const WALK_SWING_LIFT: f64 = 0.08;

/// The four procedural motion patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Static,
    Walk,
    Jump,
    Sway,
}

impl Pattern {
    pub const ALL: [Pattern; 4] = [Pattern::Walk, Pattern::Jump, Pattern::Sway, Pattern::Static];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Static => "static",
            Pattern::Walk => "walk",
            Pattern::Jump => "jump",
            Pattern::Sway => "sway",
        }
    }

    /// Prompt string for this pattern in the default vocabulary.
    pub fn prompt(self) -> &'static str {
        match self {
            Pattern::Static => "stand still",
            Pattern::Walk => "walk forward",
            Pattern::Jump => "jump forward",
            Pattern::Sway => "sway in place",
        }
    }
}

impl FromStr for Pattern {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Pattern> {
        match s {
            "static" => Ok(Pattern::Static),
            "walk" => Ok(Pattern::Walk),
            "jump" => Ok(Pattern::Jump),
            "sway" => Ok(Pattern::Sway),
            other => Err(CoreError::Validation(format!(
                "unknown pattern {other:?}; expected walk, jump, sway, or static"
            ))),
        }
    }
}

/// Shape parameters for [`synth_motion`]. `amplitude` is meters (step length
/// for walk, peak height for jump, lateral reach for sway), `period` is the
/// cycle length in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub amplitude: f64,
    pub period: f64,
    pub duration: f64,
    pub fps: f64,
}

impl SynthParams {
    /// Per-pattern default amplitude/period, at 3 s and 20 fps.
    pub fn defaults_for(pattern: Pattern) -> SynthParams {
        let (amplitude, period) = match pattern {
            Pattern::Static => (0.0, 1.0),
            Pattern::Walk => (0.5, 1.2),
            Pattern::Jump => (0.3, 1.0),
            Pattern::Sway => (0.12, 2.0),
        };
        SynthParams {
            amplitude,
            period,
            duration: 3.0,
            fps: 20.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(CoreError::Validation(format!(
                "period must be positive, got {}",
                self.period
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(CoreError::Validation(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(CoreError::Validation(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(CoreError::Validation(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }

    fn frame_count(&self) -> Result<usize> {
        let n = (self.duration * self.fps).round() as usize;
        if n < 2 {
            return Err(CoreError::Validation(format!(
                "duration {} s at {} fps yields {n} frames; need at least 2",
                self.duration, self.fps
            )));
        }
        Ok(n)
    }
}

/// Walk stance test: true when the foot with cycle offset `offset` is
/// planted at time `t`. Pure function of the public walk geometry, exposed
/// so contact-metric tests can derive the expected schedule independently of
/// the frame data.
pub fn walk_in_stance(t: f64, period: f64, offset: f64) -> bool {
    let phase = (t / period + offset).rem_euclid(1.0);
    phase < WALK_STANCE_FRACTION
}

fn smoothstep(w: f64) -> f64 {
    let w = w.clamp(0.0, 1.0);
    w * w * (3.0 - 2.0 * w)
}

struct Rig {
    rest: Vec<[f64; 3]>,
    pelvis_y: f64,
}

impl Rig {
    fn new() -> Rig {
        let rest = default_rest_pose();
        let pelvis_y = rest[0][1];
        Rig { rest, pelvis_y }
    }

    /// Rest offset of joint `j` relative to the pelvis.
    fn offset(&self, j: usize) -> [f64; 3] {
        let p = self.rest[j];
        let r = self.rest[0];
        [p[0] - r[0], p[1] - r[1], p[2] - r[2]]
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Generates a deterministic clip of `pattern`.
///
/// The same `(pattern, params, seed)` always produces identical frames; the
/// seed drives style variation only, so the documented amplitude contracts
/// (jump peak-to-trough equals `amplitude`, walk step length equals
/// `amplitude`) hold for every seed.
pub fn synth_motion(pattern: Pattern, params: &SynthParams, seed: u64) -> Result<MotionSequence> {
    params.validate()?;
    let n = params.frame_count()?;
    let rig = Rig::new();
    let mut rng = substream(seed, pattern.name(), 0);

    let frames = match pattern {
        Pattern::Static => {
            let frame = rig.rest.clone();
            vec![frame; n]
        }
        Pattern::Walk => walk_frames(&rig, params, n, &mut rng),
        Pattern::Jump => jump_frames(&rig, params, n, &mut rng),
        Pattern::Sway => sway_frames(&rig, params, n, &mut rng),
    };

    let motion = MotionSequence {
        skeleton: Skeleton::default_humanoid(),
        fps: params.fps,
        frames,
    };
    debug_assert!(motion.validate().is_ok());
    Ok(motion)
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random::<f64>() * (hi - lo)
}

/// One leg's toe position in the walk cycle. Stance holds the toe at a fixed
/// world point at [`STANCE_TOE_HEIGHT`]; swing carries it forward by one
/// stride (2 x step length) with a sinusoidal lift.
fn walk_toe(t: f64, step_len: f64, period: f64, offset: f64, side_x: f64) -> [f64; 3] {
    let cycles = t / period + offset;
    let k = cycles.floor();
    let phase = cycles - k;
    let stride = 2.0 * step_len;
    // Plant position for stance k; the root passes over it mid-stance.
    let hold_z = stride * (k - offset) + step_len * WALK_STANCE_FRACTION;
    if phase < WALK_STANCE_FRACTION {
        [side_x, STANCE_TOE_HEIGHT, hold_z]
    } else {
        let w = (phase - WALK_STANCE_FRACTION) / (1.0 - WALK_STANCE_FRACTION);
        [
            side_x,
            STANCE_TOE_HEIGHT + WALK_SWING_LIFT * (PI * w).sin(),
            hold_z + stride * smoothstep(w),
        ]
    }
}

fn walk_frames(rig: &Rig, params: &SynthParams, n: usize, rng: &mut impl Rng) -> Vec<Vec<[f64; 3]>> {
    let step_len = params.amplitude;
    let period = params.period;
    let speed = 2.0 * step_len / period;
    let bob = 0.015 * uniform(rng, 0.8, 1.2);
    let sway = 0.02 * uniform(rng, 0.8, 1.2);
    let arm_amp = 0.25 * step_len * uniform(rng, 0.8, 1.2);

    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / params.fps;
        let tau = t / period;
        let root = [
            sway * (2.0 * PI * tau).sin(),
            rig.pelvis_y + bob * (4.0 * PI * tau).cos(),
            speed * t,
        ];

        let mut frame = vec![[0.0; 3]; JOINT_COUNT];
        // Torso chain, head, collars, and shoulders ride rigidly on the root.
        for j in [0, 1, 2, 3, 6, 9, 12, 13, 14, 15, 16, 17] {
            frame[j] = add(root, rig.offset(j));
        }
        // Arms swing along Z, each in phase with the opposite leg.
        for (elbow, wrist, arm_phase) in [(18, 20, 0.5), (19, 21, 0.0)] {
            let swing = arm_amp * (2.0 * PI * (tau + arm_phase)).sin();
            frame[elbow] = add(root, add(rig.offset(elbow), [0.0, 0.0, 0.5 * swing]));
            frame[wrist] = add(root, add(rig.offset(wrist), [0.0, 0.0, swing]));
        }
        // Legs: toes follow the stance/swing schedule, ankles track the toes,
        // knees interpolate hip to ankle with a forward bulge.
        for (hip, knee, ankle, toe, offset, side_x) in
            [(1, 4, 7, 10, 0.0, 0.10), (2, 5, 8, 11, 0.5, -0.10)]
        {
            let toe_p = walk_toe(t, step_len, period, offset, side_x);
            let ankle_p = add(toe_p, [0.0, 0.06, -0.13]);
            let hip_p = frame[hip];
            let lift = toe_p[1] - STANCE_TOE_HEIGHT;
            let knee_p = [
                0.5 * (hip_p[0] + ankle_p[0]),
                0.5 * (hip_p[1] + ankle_p[1]),
                0.5 * (hip_p[2] + ankle_p[2]) + 0.06 + 0.8 * lift,
            ];
            frame[toe] = toe_p;
            frame[ankle] = ankle_p;
            frame[knee] = knee_p;
        }
        frames.push(frame);
    }
    frames
}

fn jump_frames(rig: &Rig, params: &SynthParams, n: usize, rng: &mut impl Rng) -> Vec<Vec<[f64; 3]>> {
    // No phase jitter: the cycle starts grounded and peaks at period/4, so
    // sampled frames realize the full amplitude whenever the frame grid hits
    // the quarter period (it does at the default fps/period).
    let amp = params.amplitude;
    let arm_raise = uniform(rng, 0.8, 1.2);

    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / params.fps;
        let s = (2.0 * PI * t / params.period).sin().max(0.0);
        let h = amp * s * s;
        let mut frame = vec![[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            frame[j] = add(rig.rest[j], [0.0, h, 0.0]);
        }
        // Arms lift with the body; wrists more than elbows.
        for (elbow, wrist) in [(18, 20), (19, 21)] {
            frame[elbow][1] += 0.2 * arm_raise * h;
            frame[wrist][1] += 0.4 * arm_raise * h;
        }
        frames.push(frame);
    }
    frames
}

fn sway_frames(rig: &Rig, params: &SynthParams, n: usize, rng: &mut impl Rng) -> Vec<Vec<[f64; 3]>> {
    let amp = params.amplitude;
    let phase0 = rng.random::<f64>();
    let top_gain = uniform(rng, 0.9, 1.1);
    // Lateral gain per joint: feet stay planted, weight grows up the chain.
    let gain = |j: usize| -> f64 {
        match j {
            0 => 1.0,
            1 | 2 => 0.95,
            3 => 1.1,
            6 => 1.25,
            9 => 1.4,
            12 => 1.55 * top_gain,
            13 | 14 => 1.55 * top_gain,
            15 => 1.75 * top_gain,
            16 | 17 => 1.6 * top_gain,
            18 | 19 => 1.5 * top_gain,
            20 | 21 => 1.45 * top_gain,
            _ => 0.0,
        }
    };

    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / params.fps;
        let s = (2.0 * PI * (t / params.period + phase0)).sin();
        let mut frame = vec![[0.0; 3]; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            frame[j] = add(rig.rest[j], [amp * gain(j) * s, 0.0, 0.0]);
        }
        // Ankles and toes stay at rest (planted); knees re-interpolate so the
        // legs stay connected to the shifted hips.
        for (hip, knee, ankle) in [(1, 4, 7), (2, 5, 8)] {
            let hip_p = frame[hip];
            let ankle_p = frame[ankle];
            frame[knee] = [
                0.5 * (hip_p[0] + ankle_p[0]),
                0.5 * (hip_p[1] + ankle_p[1]),
                0.5 * (hip_p[2] + ankle_p[2]) + 0.04,
            ];
        }
        frames.push(frame);
    }
    frames
}
