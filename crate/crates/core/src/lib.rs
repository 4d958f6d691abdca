//! Motion-cue conditioning toolkit.
//!
//! This crate implements a desk-scale pipeline for steering a masked motion
//! generator with sparse joint cues:
//!
//! * [`skeleton`] / [`motion`]: the fixed humanoid rig and dense joint-position
//!   sequences, with JSON round-tripping in [`io`].
//! * [`synth`] / [`edit`]: procedural clip generation (walk, jump, sway,
//!   static) and deterministic semantic edits used to build paired data.
//! * [`cues`]: sparse 2D/3D cue tracks over ten canonical joints, root-anchored
//!   and globally L2-normalized.
//! * [`camera`] / [`augment`] / [`ingest`]: virtual pinhole cameras, cue-space
//!   augmentation, and pixel-keypoint ingestion into canonical cue space.
//! * [`model`]: a small residual generator plus conditioning adapters with
//!   zero-initialized output projections, all in plain `f64` with hand-written
//!   backward passes.
//! * [`train`]: staged adapter training (3D teacher stage, then 2D student
//!   stage with feature alignment), reconstruction / alignment / orthogonality
//!   losses, Adam, and finite-difference gradient checks.
//! * [`sampling`] (under [`model`]): multi-condition classifier-free guidance
//!   over iterative masked in-filling.
//! * [`metrics`]: physical plausibility measures (jitter, foot skate, float,
//!   slide) and baseline-relative variants.
//!
//! Everything is deterministic given a seed: random draws go through named
//! substreams of a counter-based master seed, and batch reductions are
//! sequential, so repeated runs produce bitwise-identical artifacts.

pub mod augment;
pub mod camera;
pub mod checkpoint;
pub mod config;
pub mod cues;
pub mod edit;
pub mod error;
pub mod ingest;
pub mod io;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod rng;
pub mod skeleton;
pub mod synth;
#[cfg(test)]
pub(crate) mod testutil;
pub mod train;

pub use error::{CoreError, Result};
