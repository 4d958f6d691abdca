//! JSON file i/o and content hashing.
//!
//! All artifacts are JSON with struct-declaration field order and serde_json's
//! shortest-round-trip float formatting, so saving, loading, and saving again
//! reproduces files byte for byte. Loaders that have a validator run it, so a
//! successfully loaded artifact already satisfies its invariants.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::camera::CameraTrack;
use crate::error::{CoreError, Result};
use crate::motion::MotionSequence;

/// Serializes `value` as pretty-printed JSON at `path`.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CoreError::Internal(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CoreError::io(path, e))
}

/// Deserializes a `T` from the JSON file at `path`. No validation.
pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CoreError::parse(path, e))
}

/// Loads and validates a motion clip.
pub fn load_motion(path: impl AsRef<Path>) -> Result<MotionSequence> {
    let motion: MotionSequence = load_json(&path)?;
    motion.validate()?;
    Ok(motion)
}

/// Saves a motion clip.
pub fn save_motion(path: impl AsRef<Path>, motion: &MotionSequence) -> Result<()> {
    save_json(path, motion)
}

/// Loads and validates a camera track.
pub fn load_camera(path: impl AsRef<Path>) -> Result<CameraTrack> {
    let camera: CameraTrack = load_json(&path)?;
    camera.validate()?;
    Ok(camera)
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

#[cfg(test)]
mod tests {
    use crate::skeleton::{default_rest_pose, Skeleton};

    use super::*;

    #[test]
    fn motion_round_trip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let motion = MotionSequence {
            skeleton: Skeleton::default_humanoid(),
            fps: 20.0,
            // Awkward floats on purpose: 0.1 steps do not have finite binary
            // representations, so byte stability depends on shortest
            // round-trip formatting.
            frames: (0..5)
                .map(|i| {
                    default_rest_pose()
                        .iter()
                        .map(|p| [p[0] + 0.1 * i as f64, p[1] / 3.0, p[2] - 1.0e-13])
                        .collect()
                })
                .collect(),
        };
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save_motion(&a, &motion).unwrap();
        let loaded = load_motion(&a).unwrap();
        assert_eq!(loaded, motion);
        save_motion(&b, &loaded).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(sha256_file(&a).unwrap(), sha256_file(&b).unwrap());
    }

    #[test]
    fn load_errors_are_typed() {
        let dir = tempfile::tempdir().unwrap();
        let missing = load_motion(dir.path().join("nope.json"));
        assert!(matches!(missing, Err(CoreError::Io { .. })));

        let garbled = dir.path().join("garbled.json");
        fs::write(&garbled, b"{not json").unwrap();
        assert!(matches!(
            load_motion(&garbled),
            Err(CoreError::Parse { .. })
        ));
    }
}
