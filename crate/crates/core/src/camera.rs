//! Virtual cameras: seeded sampling around the subject and pinhole
//! projection of cue joints into normalized 2D cues.
//!
//! Camera frames are right-handed with X = image right, Y = image up, and
//! the view direction along -Z, so depth is the negated camera-frame Z. The
//! stored orientation quaternion rotates camera-frame vectors into world
//! frame. Focal length is normalized (dimensionless); the principal point is
//! the image center, so raw projections are centered at (0,0).

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::cues::SparseCue2D;
use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;
use crate::skeleton::CueSlot;

/// One camera pose: world position and a camera-to-world rotation stored as
/// a unit quaternion `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

impl CameraPose {
    fn rotation(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.orientation;
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
    }

    /// World point -> camera frame (X right, Y up, view along -Z).
    pub fn world_to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let rel = Vector3::new(
            p[0] - self.position[0],
            p[1] - self.position[1],
            p[2] - self.position[2],
        );
        let v = self.rotation().inverse_transform_vector(&rel);
        [v.x, v.y, v.z]
    }
}

/// A per-frame camera track with shared intrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraTrack {
    pub fps: f64,
    pub focal: f64,
    pub poses: Vec<CameraPose>,
}

impl CameraTrack {
    pub fn frame_count(&self) -> usize {
        self.poses.len()
    }

    /// Checks fps/focal positivity, finiteness, and unit-norm quaternions.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(CoreError::Validation(format!(
                "camera fps must be positive, got {}",
                self.fps
            )));
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(CoreError::Validation(format!(
                "focal length must be positive, got {}",
                self.focal
            )));
        }
        if self.poses.is_empty() {
            return Err(CoreError::Validation("camera track has no poses".into()));
        }
        for (n, pose) in self.poses.iter().enumerate() {
            if !pose.position.iter().all(|c| c.is_finite()) {
                return Err(CoreError::Validation(format!(
                    "non-finite camera position at frame {n}"
                )));
            }
            let norm2: f64 = pose.orientation.iter().map(|c| c * c).sum();
            if !norm2.is_finite() || (norm2.sqrt() - 1.0).abs() > 1e-9 {
                return Err(CoreError::Validation(format!(
                    "camera quaternion at frame {n} is not unit-norm"
                )));
            }
        }
        Ok(())
    }
}

/// Sampling ranges for [`sample_camera`]; angles in degrees, distances in
/// meters, drift speed in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraRanges {
    pub azimuth_deg: [f64; 2],
    pub elevation_deg: [f64; 2],
    pub distance: [f64; 2],
    pub drift_speed: f64,
    pub focal: f64,
}

impl Default for CameraRanges {
    fn default() -> Self {
        CameraRanges {
            azimuth_deg: [0.0, 360.0],
            elevation_deg: [-10.0, 30.0],
            distance: [2.0, 6.0],
            drift_speed: 0.5,
            focal: 1.0,
        }
    }
}

impl CameraRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] <= r[1] && r.iter().all(|c| c.is_finite());
        if !ordered(self.azimuth_deg) {
            return Err(CoreError::Validation(format!(
                "azimuth range {:?} is not ordered",
                self.azimuth_deg
            )));
        }
        if !ordered(self.elevation_deg)
            || self.elevation_deg[0] <= -90.0
            || self.elevation_deg[1] >= 90.0
        {
            return Err(CoreError::Validation(format!(
                "elevation range {:?} must be ordered inside (-90, 90)",
                self.elevation_deg
            )));
        }
        if !ordered(self.distance) || self.distance[0] <= 0.0 {
            return Err(CoreError::Validation(format!(
                "distance range {:?} must be ordered and positive",
                self.distance
            )));
        }
        if !(self.drift_speed >= 0.0 && self.drift_speed.is_finite()) {
            return Err(CoreError::Validation(format!(
                "drift speed must be non-negative, got {}",
                self.drift_speed
            )));
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(CoreError::Validation(format!(
                "focal length must be positive, got {}",
                self.focal
            )));
        }
        Ok(())
    }
}

/// Mean root position over the clip; the point sampled cameras orbit and
/// look at.
pub fn subject_centroid(motion: &MotionSequence) -> [f64; 3] {
    let root = motion.skeleton.cue_joint(CueSlot::Root);
    let mut sum = [0.0; 3];
    for frame in &motion.frames {
        for c in 0..3 {
            sum[c] += frame[root][c];
        }
    }
    let n = motion.frame_count() as f64;
    [sum[0] / n, sum[1] / n, sum[2] / n]
}

/// Camera-to-world rotation looking from `position` toward `target`.
fn look_at(position: Vector3<f64>, target: Vector3<f64>) -> UnitQuaternion<f64> {
    let forward = (target - position).normalize();
    let mut up = Vector3::y();
    if forward.dot(&up).abs() > 0.999 {
        up = Vector3::x();
    }
    let right = forward.cross(&up).normalize();
    let cam_up = right.cross(&forward);
    // Columns are the camera axes in world coordinates; view axis is -Z.
    let rot = Rotation3::from_basis_unchecked(&[right, cam_up, -forward]);
    UnitQuaternion::from_rotation_matrix(&rot)
}

fn spherical_position(target: [f64; 3], azimuth: f64, elevation: f64, radius: f64) -> [f64; 3] {
    let (sin_az, cos_az) = azimuth.sin_cos();
    let (sin_el, cos_el) = elevation.sin_cos();
    [
        target[0] + radius * cos_el * sin_az,
        target[1] + radius * sin_el,
        target[2] + radius * cos_el * cos_az,
    ]
}

/// Reflects `x` into `[lo, hi]`; a degenerate interval pins it to `lo`.
fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let mut x = x;
    if x > hi {
        x = 2.0 * hi - x;
    }
    if x < lo {
        x = 2.0 * lo - x;
    }
    x.clamp(lo, hi)
}

/// Samples a smooth random camera track orbiting `target`.
///
/// The start pose draws azimuth/elevation/distance uniformly from the
/// ranges; drift integrates slowly varying spherical velocities whose
/// per-frame budgets are split so the Euclidean displacement between
/// consecutive positions never exceeds `drift_speed / fps`. Every pose looks
/// at `target`. Deterministic per seed.
pub fn sample_camera(
    n_frames: usize,
    fps: f64,
    seed: u64,
    ranges: &CameraRanges,
    target: [f64; 3],
) -> Result<CameraTrack> {
    ranges.validate()?;
    if n_frames < 2 {
        return Err(CoreError::Validation(format!(
            "camera track needs at least 2 frames, got {n_frames}"
        )));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(CoreError::Validation(format!("fps must be positive, got {fps}")));
    }
    if !target.iter().all(|c| c.is_finite()) {
        return Err(CoreError::Validation("camera target must be finite".into()));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let deg = std::f64::consts::PI / 180.0;
    let az_range = [ranges.azimuth_deg[0] * deg, ranges.azimuth_deg[1] * deg];
    let el_range = [ranges.elevation_deg[0] * deg, ranges.elevation_deg[1] * deg];
    let [d_lo, d_hi] = ranges.distance;

    let mut uniform = |lo: f64, hi: f64| lo + rng.random::<f64>() * (hi - lo);
    let mut azimuth = uniform(az_range[0], az_range[1]);
    let mut elevation = uniform(el_range[0], el_range[1]);
    let mut radius = uniform(d_lo, d_hi);

    // Per-frame displacement bound: |dr| + r_max*(|daz| + |del|) stays below
    // drift_speed/fps by giving the radial walk half the budget and each
    // angular walk a quarter (scaled by the maximum radius).
    let max_step = ranges.drift_speed / fps;
    let cap_r = 0.5 * max_step;
    let cap_ang = 0.25 * max_step / d_hi;
    let mut v_r = uniform(-cap_r, cap_r);
    let mut v_az = uniform(-cap_ang, cap_ang);
    let mut v_el = uniform(-cap_ang, cap_ang);

    let mut poses = Vec::with_capacity(n_frames);
    for _ in 0..n_frames {
        let position = spherical_position(target, azimuth, elevation, radius);
        let q = look_at(
            Vector3::new(position[0], position[1], position[2]),
            Vector3::new(target[0], target[1], target[2]),
        );
        poses.push(CameraPose {
            position,
            orientation: [q.w, q.i, q.j, q.k],
        });

        radius = reflect(radius + v_r, d_lo, d_hi);
        elevation = reflect(elevation + v_el, el_range[0], el_range[1]);
        azimuth += v_az;
        v_r = (0.9 * v_r + 0.3 * uniform(-cap_r, cap_r)).clamp(-cap_r, cap_r);
        v_az = (0.9 * v_az + 0.3 * uniform(-cap_ang, cap_ang)).clamp(-cap_ang, cap_ang);
        v_el = (0.9 * v_el + 0.3 * uniform(-cap_ang, cap_ang)).clamp(-cap_ang, cap_ang);
    }

    let track = CameraTrack {
        fps,
        focal: ranges.focal,
        poses,
    };
    debug_assert!(track.validate().is_ok());
    Ok(track)
}

/// Pinhole projection of a camera-frame point given as (x right, y up,
/// depth along the view axis). Returns `None` for non-positive depth.
pub fn project_point(focal: f64, x: f64, y: f64, depth: f64) -> Option<[f64; 2]> {
    if depth <= 0.0 {
        return None;
    }
    Some([focal * x / depth, focal * y / depth])
}

/// Raw (un-normalized) image-plane projections of the ten cue joints,
/// per frame. Errors when a cue joint has non-positive depth.
pub fn project_raw(
    motion: &MotionSequence,
    cam: &CameraTrack,
) -> Result<Vec<[[f64; 2]; CueSlot::COUNT]>> {
    if cam.frame_count() != motion.frame_count() {
        return Err(CoreError::ShapeMismatch(format!(
            "camera has {} poses for {} motion frames",
            cam.frame_count(),
            motion.frame_count()
        )));
    }
    let joints = motion.skeleton.cue_joints();
    let mut out = Vec::with_capacity(motion.frame_count());
    for (n, frame) in motion.frames.iter().enumerate() {
        let pose = &cam.poses[n];
        let mut row = [[0.0; 2]; CueSlot::COUNT];
        for slot in CueSlot::ALL {
            let v = pose.world_to_camera(frame[joints[slot.index()]]);
            let depth = -v[2];
            row[slot.index()] =
                project_point(cam.focal, v[0], v[1], depth).ok_or(CoreError::BehindCamera {
                    frame: n,
                    slot: slot.name(),
                })?;
        }
        out.push(row);
    }
    Ok(out)
}

/// Projects the cue joints through `cam` and converts to the normalized
/// sparse 2D representation: root-anchored, all slots valid, sequence-global
/// unit norm.
pub fn project(motion: &MotionSequence, cam: &CameraTrack) -> Result<SparseCue2D> {
    let raw = project_raw(motion, cam)?;
    let mut cues = SparseCue2D::empty(motion.fps, raw.len());
    for (n, row) in raw.iter().enumerate() {
        let root = row[0];
        for s in 1..CueSlot::COUNT {
            cues.cues[n][s] = [row[s][0] - root[0], row[s][1] - root[1]];
        }
        cues.valid[n] = [true; CueSlot::COUNT];
    }
    cues.normalize();
    Ok(cues)
}
