//! Timings for the pipeline hot paths: synthesis, cue extraction,
//! projection, model passes, guided sampling, and metrics.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use reenact_bench::{bench_model, walk_cues_2d, walk_motion};
use reenact_core::camera::{sample_camera, subject_centroid, CameraRanges};
use reenact_core::cues::extract_cues_3d;
use reenact_core::metrics::{compute_metrics, ContactModel};
use reenact_core::model::{
    adapter_forward, base_forward, cfg_sample, featurize, ConditionRef, MaskSpec, SamplingSpec,
};
use reenact_core::skeleton::Skeleton;
use reenact_core::synth::{synth_motion, Pattern, SynthParams};
use reenact_core::train::{loss_base_grad, loss_ortho_grad};

fn bench_synth(c: &mut Criterion) {
    let params = SynthParams::defaults_for(Pattern::Walk);
    c.bench_function("synth/walk_60_frames", |b| {
        b.iter(|| synth_motion(Pattern::Walk, black_box(&params), 7).unwrap())
    });
}

fn bench_cue_extraction(c: &mut Criterion) {
    let motion = walk_motion();
    c.bench_function("cues/extract_3d_normalized", |b| {
        b.iter(|| extract_cues_3d(black_box(&motion)))
    });
}

fn bench_projection(c: &mut Criterion) {
    let motion = walk_motion();
    let centroid = subject_centroid(&motion);
    let ranges = CameraRanges::default();
    c.bench_function("camera/sample_and_project", |b| {
        b.iter(|| {
            let cam = sample_camera(
                motion.frame_count(),
                motion.fps,
                black_box(7),
                &ranges,
                centroid,
            )
            .unwrap();
            reenact_core::camera::project(&motion, &cam).unwrap()
        })
    });
}

fn bench_model_passes(c: &mut Criterion) {
    let (base, la2d) = bench_model();
    let motion = walk_motion();
    let cues = walk_cues_2d();
    let x = featurize(&motion);
    let mask = MaskSpec::all_masked(x.len());

    c.bench_function("model/base_forward_60x66", |b| {
        b.iter(|| base_forward(&base, black_box(&x), Some(0), &mask).unwrap())
    });
    c.bench_function("model/adapter_forward_2d", |b| {
        b.iter(|| adapter_forward(&la2d, black_box(&ConditionRef::Local2d(&cues))).unwrap())
    });
    c.bench_function("model/reconstruction_grad", |b| {
        let y = base_forward(&base, &x, Some(0), &mask).unwrap();
        b.iter(|| loss_base_grad(black_box(&y), &x, &mask).unwrap())
    });
    c.bench_function("model/ortho_grad", |b| {
        let f = adapter_forward(&la2d, &ConditionRef::Local2d(&cues)).unwrap();
        b.iter(|| loss_ortho_grad(black_box(&f), &f).unwrap())
    });
}

fn bench_sampling(c: &mut Criterion) {
    let (base, la2d) = bench_model();
    let cues = walk_cues_2d();
    let skeleton = Skeleton::default_humanoid();
    let spec = SamplingSpec {
        seed: 5,
        ..SamplingSpec::default()
    };
    c.bench_function("sample/guided_60_frames", |b| {
        b.iter(|| {
            cfg_sample(
                &base,
                &la2d,
                Some(black_box(&cues)),
                Some(0),
                &skeleton,
                20.0,
                &spec,
            )
            .unwrap()
        })
    });
}

fn bench_metrics(c: &mut Criterion) {
    let motion = walk_motion();
    let contact = ContactModel::default();
    c.bench_function("metrics/full_report", |b| {
        b.iter(|| compute_metrics(black_box(&motion), &contact).unwrap())
    });
}

criterion_group!(
    benches,
    bench_synth,
    bench_cue_extraction,
    bench_projection,
    bench_model_passes,
    bench_sampling,
    bench_metrics
);
criterion_main!(benches);
