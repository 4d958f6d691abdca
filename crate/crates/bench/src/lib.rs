//! Shared fixtures for the pipeline benchmarks.
//!
//! Everything here is deterministic, so timing runs compare like with like
//! across code changes.

use rand::Rng;

use reenact_core::camera::{project, sample_camera, subject_centroid, CameraRanges};
use reenact_core::cues::SparseCue2D;
use reenact_core::model::{
    init_adapter, init_generator, pose_dim, AdapterKind, AdapterParams, GeneratorParams, ModelDims,
};
use reenact_core::motion::MotionSequence;
use reenact_core::rng::substream;
use reenact_core::skeleton::Skeleton;
use reenact_core::synth::{synth_motion, Pattern, SynthParams};

/// A 3 s walking clip at 20 fps, the workhorse input.
pub fn walk_motion() -> MotionSequence {
    synth_motion(Pattern::Walk, &SynthParams::defaults_for(Pattern::Walk), 7)
        .expect("default walk synthesizes")
}

/// Normalized 2D cues of [`walk_motion`] seen through a sampled camera.
pub fn walk_cues_2d() -> SparseCue2D {
    let motion = walk_motion();
    let cam = sample_camera(
        motion.frame_count(),
        motion.fps,
        7,
        &CameraRanges::default(),
        subject_centroid(&motion),
    )
    .expect("default camera ranges sample");
    project(&motion, &cam).expect("default orbit keeps the subject in front")
}

/// Default-size generator plus a 2D adapter whose output projections carry
/// small deterministic values, so conditioned passes do representative work
/// instead of adding zeros.
pub fn bench_model() -> (GeneratorParams, AdapterParams) {
    let skeleton = Skeleton::default_humanoid();
    let dims = ModelDims {
        width: 64,
        blocks: 4,
        n_max: 240,
        pose_dim: pose_dim(&skeleton),
    };
    let vocab: Vec<String> = Pattern::ALL.iter().map(|p| p.prompt().to_string()).collect();
    let base = init_generator(dims, vocab, 11).expect("generator initializes");
    let mut la2d = init_adapter(&base, AdapterKind::Local2d, 12).expect("adapter initializes");
    let mut rng = substream(12, "bench-proj", 0);
    for tensor in la2d.proj_w.iter_mut().chain(la2d.proj_b.iter_mut()) {
        for v in tensor.iter_mut() {
            *v = 0.1 * (rng.random::<f64>() - 0.5);
        }
    }
    (base, la2d)
}
