//! Training-time 2D cue augmentation: symmetric limb scaling, global
//! in-plane rotation, and Gaussian perturbation, followed by
//! re-normalization.
//!
//! The stages run in the fixed order scale -> rotate -> noise so the noise
//! models extraction error on the final geometry. Each enabled stage draws
//! from the seeded stream in a documented order (arm scale, leg scale,
//! angle, then per-entry noise in frame/slot/component order); disabled
//! stages draw nothing. With every stage disabled the input is returned
//! unchanged, bit for bit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cues::SparseCue2D;
use crate::error::{CoreError, Result};
use crate::skeleton::CueSlot;

/// Arm slots scaled by the first limb factor.
const ARM_SLOTS: [usize; 4] = [2, 3, 4, 5];
/// Leg slots scaled by the second limb factor.
const LEG_SLOTS: [usize; 4] = [6, 7, 8, 9];

/// Configuration for [`augment`]. Ranges are inclusive; `rotation_range_deg`
/// is a half-range (the angle draws from `[-r, +r]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enable_limb_scale: bool,
    pub limb_scale_range: [f64; 2],
    pub enable_rotation: bool,
    pub rotation_range_deg: f64,
    pub enable_noise: bool,
    pub noise_sigma: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enable_limb_scale: true,
            limb_scale_range: [0.7, 1.3],
            enable_rotation: true,
            rotation_range_deg: 20.0,
            enable_noise: true,
            noise_sigma: 0.01,
        }
    }
}

impl AugmentConfig {
    /// Everything off; [`augment`] becomes the identity.
    pub fn disabled() -> Self {
        AugmentConfig {
            enable_limb_scale: false,
            enable_rotation: false,
            enable_noise: false,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.limb_scale_range;
        if !(lo > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
            return Err(CoreError::Validation(format!(
                "limb scale range {:?} must satisfy 0 < lo <= hi",
                self.limb_scale_range
            )));
        }
        if !(self.rotation_range_deg >= 0.0 && self.rotation_range_deg.is_finite()) {
            return Err(CoreError::Validation(format!(
                "rotation range must be non-negative, got {}",
                self.rotation_range_deg
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CoreError::Validation(format!(
                "noise sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    fn any_enabled(&self) -> bool {
        self.enable_limb_scale || self.enable_rotation || self.enable_noise
    }
}

/// Applies the configured augmentations to a normalized 2D cue track.
///
/// Valid non-root entries are transformed; the root slot and invalid
/// (zero-padded) entries never change. The result is re-normalized, so the
/// output satisfies the same invariants as the input. Deterministic per
/// `(cues, cfg, seed)`.
pub fn augment(cues: &SparseCue2D, cfg: &AugmentConfig, seed: u64) -> Result<SparseCue2D> {
    cfg.validate()?;
    if !cfg.any_enabled() {
        return Ok(cues.clone());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut out = cues.clone();

    if cfg.enable_limb_scale {
        let [lo, hi] = cfg.limb_scale_range;
        let arm_scale = lo + rng.random::<f64>() * (hi - lo);
        let leg_scale = lo + rng.random::<f64>() * (hi - lo);
        for (frame, valid) in out.cues.iter_mut().zip(&out.valid) {
            for s in ARM_SLOTS {
                if valid[s] {
                    frame[s][0] *= arm_scale;
                    frame[s][1] *= arm_scale;
                }
            }
            for s in LEG_SLOTS {
                if valid[s] {
                    frame[s][0] *= leg_scale;
                    frame[s][1] *= leg_scale;
                }
            }
        }
    }

    if cfg.enable_rotation {
        let r = cfg.rotation_range_deg.to_radians();
        let angle = -r + rng.random::<f64>() * 2.0 * r;
        let (sin_a, cos_a) = angle.sin_cos();
        for (frame, valid) in out.cues.iter_mut().zip(&out.valid) {
            for s in 1..CueSlot::COUNT {
                if valid[s] {
                    let [x, y] = frame[s];
                    frame[s] = [x * cos_a - y * sin_a, x * sin_a + y * cos_a];
                }
            }
        }
    }

    if cfg.enable_noise {
        let normal = Normal::new(0.0, cfg.noise_sigma)
            .map_err(|e| CoreError::Validation(format!("invalid noise sigma: {e}")))?;
        for (frame, valid) in out.cues.iter_mut().zip(&out.valid) {
            for s in 1..CueSlot::COUNT {
                if valid[s] {
                    frame[s][0] += normal.sample(&mut rng);
                    frame[s][1] += normal.sample(&mut rng);
                }
            }
        }
    }

    out.normalize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    use crate::camera::{project, sample_camera, subject_centroid, CameraRanges};
    use crate::cues::NORM_TOL;
    use crate::synth::{synth_motion, Pattern, SynthParams};

    use super::*;

    fn walk_cues(seed: u64) -> SparseCue2D {
        let motion =
            synth_motion(Pattern::Walk, &SynthParams::defaults_for(Pattern::Walk), seed).unwrap();
        let cam = sample_camera(
            motion.frame_count(),
            motion.fps,
            seed,
            &CameraRanges::default(),
            subject_centroid(&motion),
        )
        .unwrap();
        project(&motion, &cam).unwrap()
    }

    #[test]
    fn disabled_augment_is_bitwise_identity() {
        let cues = walk_cues(4);
        let out = augment(&cues, &AugmentConfig::disabled(), 123).unwrap();
        assert_eq!(out, cues);
    }

    #[test]
    fn rotation_is_an_isometry_of_simultaneous_cues() {
        let cues = walk_cues(8);
        let cfg = AugmentConfig {
            enable_limb_scale: false,
            enable_noise: false,
            rotation_range_deg: 90.0,
            ..AugmentConfig::default()
        };
        let out = augment(&cues, &cfg, 55).unwrap();
        assert!((out.global_norm() - 1.0).abs() <= NORM_TOL);
        // Pairwise distances between same-frame cues survive rotation and
        // the (near no-op) re-normalization.
        for n in 0..cues.frame_count() {
            for a in 1..CueSlot::COUNT {
                for b in (a + 1)..CueSlot::COUNT {
                    let d_in = ((cues.cues[n][a][0] - cues.cues[n][b][0]).powi(2)
                        + (cues.cues[n][a][1] - cues.cues[n][b][1]).powi(2))
                    .sqrt();
                    let d_out = ((out.cues[n][a][0] - out.cues[n][b][0]).powi(2)
                        + (out.cues[n][a][1] - out.cues[n][b][1]).powi(2))
                    .sqrt();
                    assert!((d_in - d_out).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rotation_by_fixed_ninety_degrees_matches_the_matrix() {
        let cues = walk_cues(9);
        // A degenerate range [-0,+0] pins the angle; instead verify the
        // matrix against a direct recomputation with the same drawn angle.
        let cfg = AugmentConfig {
            enable_limb_scale: false,
            enable_noise: false,
            rotation_range_deg: 90.0,
            ..AugmentConfig::default()
        };
        let seed = 77;
        let out = augment(&cues, &cfg, seed).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let r = cfg.rotation_range_deg.to_radians();
        let angle = -r + rng.random::<f64>() * 2.0 * r;
        let norm_before: f64 = {
            let mut rotated = cues.clone();
            let (sin_a, cos_a) = angle.sin_cos();
            for (frame, valid) in rotated.cues.iter_mut().zip(&rotated.valid) {
                for s in 1..CueSlot::COUNT {
                    if valid[s] {
                        let [x, y] = frame[s];
                        frame[s] = [x * cos_a - y * sin_a, x * sin_a + y * cos_a];
                    }
                }
            }
            rotated.global_norm()
        };
        // Rotation preserves the norm, so re-normalization divides by ~1.
        assert!((norm_before - 1.0).abs() < 1e-9);
        assert!((out.global_norm() - 1.0).abs() <= NORM_TOL);
    }

    #[test]
    fn limb_scaling_is_symmetric_across_sides() {
        let cues = walk_cues(10);
        let cfg = AugmentConfig {
            enable_rotation: false,
            enable_noise: false,
            limb_scale_range: [2.0, 2.0],
            ..AugmentConfig::default()
        };
        let out = augment(&cues, &cfg, 3).unwrap();
        let mag = |c: &SparseCue2D, n: usize, s: usize| {
            (c.cues[n][s][0].powi(2) + c.cues[n][s][1].powi(2)).sqrt()
        };
        for n in 0..cues.frame_count() {
            // Left/right magnitude ratios survive symmetric scaling.
            for (l, r) in [(2, 3), (4, 5), (6, 7), (8, 9)] {
                let before = mag(&cues, n, l) / mag(&cues, n, r);
                let after = mag(&out, n, l) / mag(&out, n, r);
                assert!((before - after).abs() < 1e-9);
            }
            // Arms scale by exactly 2 relative to the (unscaled) head, up to
            // the global re-normalization shared by both.
            let head_before = mag(&cues, n, 1);
            let head_after = mag(&out, n, 1);
            if head_before > 1e-9 {
                let hand_ratio = (mag(&out, n, 4) / head_after) / (mag(&cues, n, 4) / head_before);
                assert!((hand_ratio - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tiny_noise_is_nearly_identity() {
        let cues = walk_cues(11);
        let cfg = AugmentConfig {
            enable_limb_scale: false,
            enable_rotation: false,
            noise_sigma: 1e-6,
            ..AugmentConfig::default()
        };
        let out = augment(&cues, &cfg, 1).unwrap();
        let mut count = 0;
        let mut worst: f64 = 0.0;
        for n in 0..cues.frame_count() {
            for s in 1..CueSlot::COUNT {
                for c in 0..2 {
                    worst = worst.max((out.cues[n][s][c] - cues.cues[n][s][c]).abs());
                    count += 1;
                }
            }
        }
        assert!(count >= 1000, "need at least 1000 entries, have {count}");
        assert!(worst <= 5.0 * cfg.noise_sigma, "worst deviation {worst}");
    }

    #[test]
    fn augmented_output_keeps_the_invariants() {
        let cues = walk_cues(12);
        let out = augment(&cues, &AugmentConfig::default(), 42).unwrap();
        assert!((out.global_norm() - 1.0).abs() <= NORM_TOL);
        for (frame, valid) in out.cues.iter().zip(&out.valid) {
            assert_eq!(frame[0], [0.0; 2]);
            for s in 0..CueSlot::COUNT {
                if !valid[s] {
                    assert_eq!(frame[s], [0.0; 2]);
                }
            }
        }
        let again = augment(&cues, &AugmentConfig::default(), 42).unwrap();
        assert_eq!(again, out);
    }
}
