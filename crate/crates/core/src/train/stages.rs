//! Progressive training stages: base reconstruction pretraining, the 3D
//! conditioning stage, and the 2D distillation stage.
//!
//! All three stages share the same scaffolding. Clips are shuffled per
//! epoch by a named substream, each item draws its mask and text dropout
//! from a substream keyed by (epoch, position), gradients accumulate in
//! batch order and are averaged, and one optimizer step runs per batch.
//! The base generator is only updated in the first stage; the adapter
//! stages clone it and never take a mutable reference to the clone, so
//! freezing holds by construction.
//!
//! Loss rows always log the raw loss terms. Ablations zero the gradient
//! weight of a term, not its measurement, so an ablated run still reports
//! what the term would have been.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::augment;
use crate::camera::{project, sample_camera, CameraRanges};
use crate::config::{PipelineConfig, TrainConfig, TrainStage};
use crate::cues::{extract_cues_3d, SparseCue2D, SparseCue3D};
use crate::error::{CoreError, Result};
use crate::model::{
    adapter_backward, adapter_forward, adapter_forward_full, base_backward, base_forward_full,
    featurize, init_adapter, init_generator, pose_dim, AdapterCache, AdapterKind, AdapterParams,
    ConditionRef, FeatureSeq, GeneratorParams, MaskSpec, ModelDims,
};
use crate::motion::{root_trajectory, MotionSequence, RootTrajectory};
use crate::rng::{derive_seed, substream};
use crate::skeleton::Skeleton;

use super::data::{build_clipset, ClipSet};
use super::losses::{loss_3d_align_grad, loss_base, loss_base_grad, loss_ortho, loss_ortho_grad};
use super::optimizer::{AdamConfig, AdamState};

/// One optimizer step of the loss log. The raw terms are unweighted;
/// `total` applies the effective weights of the run that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub step: u64,
    pub l_base: f64,
    pub l_o: f64,
    pub l_3d: f64,
    pub total: f64,
}

/// Epoch-end summary over the held-out clips, measured with fixed masks
/// and cameras so epochs are comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub epoch: usize,
    pub l_base: f64,
    pub l_o: f64,
    pub l_3d: f64,
}

/// Everything a finished stage hands to the next one or to a checkpoint.
///
/// `la2d` holds the stage-two student; under the 3D-input ablation its
/// kind is `Local3d` even though it sits in this field. Histories cover
/// the stage that produced the state, not earlier ones. Optimizer
/// moments are keyed by branch name and are not carried across stages.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub stage: TrainStage,
    pub base: GeneratorParams,
    pub la3d: Option<AdapterParams>,
    pub la2d: Option<AdapterParams>,
    pub ga3d: Option<AdapterParams>,
    pub epoch: usize,
    pub step: u64,
    pub loss_history: Vec<LossRow>,
    pub val_history: Vec<ValRecord>,
    pub moments: BTreeMap<String, AdamState>,
}

struct ItemDraw {
    mask: MaskSpec,
    text_id: Option<usize>,
    /// Train this item on the local branch alone. Guidance keeps only
    /// the local branch, so it must learn to carry the cues by itself.
    drop_global: bool,
}

/// Mask ratio, masked-frame choice, and condition dropout for one
/// training item. Draw order is fixed: ratio, frame shuffle, text coin,
/// global coin.
fn draw_item(tc: &TrainConfig, label: &str, uid: u64, n: usize, text_id: usize) -> ItemDraw {
    let mut rng = substream(tc.seed, label, uid);
    let ratio = tc.mask_ratio_min + (tc.mask_ratio - tc.mask_ratio_min) * rng.random::<f64>();
    let want = ((ratio * n as f64).ceil() as usize).clamp(1, n);
    let mut frames: Vec<usize> = (0..n).collect();
    frames.shuffle(&mut rng);
    let mut masked = vec![false; n];
    for &t in frames.iter().take(want) {
        masked[t] = true;
    }
    let drop = rng.random::<f64>() < tc.text_drop_prob;
    let drop_global = rng.random::<f64>() < tc.global_drop_prob;
    ItemDraw {
        mask: MaskSpec { masked },
        text_id: if drop { None } else { Some(text_id) },
        drop_global,
    }
}

/// Validation mask for one held-out clip. Keyed by clip index alone so
/// every epoch and every stage scores the same frames.
fn draw_val_mask(tc: &TrainConfig, idx: u64, n: usize) -> MaskSpec {
    let mut rng = substream(tc.seed, "val-mask", idx);
    let ratio = tc.mask_ratio_min + (tc.mask_ratio - tc.mask_ratio_min) * rng.random::<f64>();
    let want = ((ratio * n as f64).ceil() as usize).clamp(1, n);
    let mut frames: Vec<usize> = (0..n).collect();
    frames.shuffle(&mut rng);
    let mut masked = vec![false; n];
    for &t in frames.iter().take(want) {
        masked[t] = true;
    }
    MaskSpec { masked }
}

fn epoch_order(seed: u64, label: &str, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, label, epoch as u64));
    order
}

fn scale_tensors(tensors: Vec<&mut Vec<f64>>, k: f64) {
    for t in tensors {
        for v in t.iter_mut() {
            *v *= k;
        }
    }
}

fn check_compatible(base: &GeneratorParams, cfg: &PipelineConfig) -> Result<()> {
    base.validate()?;
    let m = &cfg.model;
    if base.dims.width != m.width || base.dims.blocks != m.blocks || base.dims.n_max != m.n_max {
        return Err(CoreError::ShapeMismatch(format!(
            "generator is width {} blocks {} n_max {}, config wants width {} blocks {} n_max {}",
            base.dims.width, base.dims.blocks, base.dims.n_max, m.width, m.blocks, m.n_max
        )));
    }
    if base.vocab != m.vocab {
        return Err(CoreError::Validation(
            "generator vocabulary does not match the config".into(),
        ));
    }
    Ok(())
}

fn build_sets(cfg: &PipelineConfig) -> Result<(ClipSet, ClipSet)> {
    let train = build_clipset(
        &cfg.data,
        &cfg.model.vocab,
        cfg.train.seed,
        "train",
        cfg.data.clips,
    )?;
    let val = build_clipset(
        &cfg.data,
        &cfg.model.vocab,
        cfg.train.seed,
        "val",
        cfg.data.val_clips,
    )?;
    Ok((train, val))
}

/// Mean root position, the aim point for sampled cameras.
fn centroid(motion: &MotionSequence) -> [f64; 3] {
    crate::camera::subject_centroid(motion)
}

/// Samples a camera and projects the clip, retrying with derived seeds
/// when a cue joint lands behind the camera. The retry count is part of
/// the derivation, so the result is deterministic.
fn project_with_retries(
    motion: &MotionSequence,
    target: [f64; 3],
    cam_seed: u64,
    ranges: &CameraRanges,
) -> Result<SparseCue2D> {
    let mut last = None;
    for attempt in 0..8u64 {
        let seed = if attempt == 0 {
            cam_seed
        } else {
            derive_seed(cam_seed, "camera-retry", attempt)
        };
        let cam = sample_camera(motion.frame_count(), motion.fps, seed, ranges, target)?;
        match project(motion, &cam) {
            Ok(cues) => return Ok(cues),
            Err(e @ CoreError::BehindCamera { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| CoreError::Internal("camera retry loop fell through".into())))
}

struct BranchPass {
    features: FeatureSeq,
    cache: AdapterCache,
}

fn run_branch(adapter: &AdapterParams, condition: &ConditionRef<'_>) -> Result<BranchPass> {
    let (features, cache) = adapter_forward_full(adapter, condition)?;
    Ok(BranchPass { features, cache })
}

/// Trains the unconditional generator on masked reconstruction.
pub fn train_base(cfg: &PipelineConfig) -> Result<TrainState> {
    cfg.validate()?;
    let tc = &cfg.train;
    let dims = ModelDims {
        width: cfg.model.width,
        blocks: cfg.model.blocks,
        n_max: cfg.model.n_max,
        pose_dim: pose_dim(&Skeleton::default_humanoid()),
    };
    let mut base = init_generator(dims, cfg.model.vocab.clone(), tc.seed)?;
    let (train_set, val_set) = build_sets(cfg)?;
    let features: Vec<Vec<Vec<f64>>> =
        train_set.clips.iter().map(|c| featurize(&c.motion)).collect();
    let val_features: Vec<Vec<Vec<f64>>> =
        val_set.clips.iter().map(|c| featurize(&c.motion)).collect();

    let acfg = AdamConfig::with_lr(tc.learning_rate);
    let mut adam = AdamState::for_shapes(&base.named_tensors());
    let mut loss_history = Vec::new();
    let mut val_history = Vec::new();
    let mut step: u64 = 0;

    for epoch in 0..tc.epochs {
        let order = epoch_order(tc.seed, "base-order", epoch, train_set.len());
        let mut pos: u64 = 0;
        for batch in order.chunks(tc.batch_size) {
            let mut grads = GeneratorParams::zeros_like(&base);
            let mut sum_base = 0.0;
            for &clip_idx in batch {
                let uid = epoch as u64 * 1_000_000 + pos;
                pos += 1;
                let clip = &train_set.clips[clip_idx];
                let x = &features[clip_idx];
                let draw = draw_item(tc, "base-item", uid, x.len(), clip.text_id);
                let (y, cache) = base_forward_full(&base, x, draw.text_id, &draw.mask, None)?;
                let (l, d_y) = loss_base_grad(&y, x, &draw.mask)?;
                sum_base += l;
                base_backward(&base, &cache, &d_y, Some(&mut grads), false)?;
            }
            scale_tensors(grads.tensors_mut(), 1.0 / batch.len() as f64);
            adam.step(&acfg, base.tensors_mut(), &grads.named_tensors())?;
            step += 1;
            let mean = sum_base / batch.len() as f64;
            loss_history.push(LossRow {
                step,
                l_base: mean,
                l_o: 0.0,
                l_3d: 0.0,
                total: mean,
            });
        }

        let mut v_base = 0.0;
        for (idx, clip) in val_set.clips.iter().enumerate() {
            let x = &val_features[idx];
            let mask = draw_val_mask(tc, idx as u64, x.len());
            let (y, _) = base_forward_full(&base, x, Some(clip.text_id), &mask, None)?;
            v_base += loss_base(&y, x, &mask)?;
        }
        val_history.push(ValRecord {
            epoch,
            l_base: v_base / val_set.len() as f64,
            l_o: 0.0,
            l_3d: 0.0,
        });
    }

    let mut moments = BTreeMap::new();
    moments.insert("base".to_string(), adam);
    Ok(TrainState {
        stage: TrainStage::Base,
        base,
        la3d: None,
        la2d: None,
        ga3d: None,
        epoch: tc.epochs,
        step,
        loss_history,
        val_history,
        moments,
    })
}

/// Trains the 3D local adapter, and unless ablated the global adapter,
/// against the frozen base generator.
pub fn train_stage_3d(prior: &TrainState, cfg: &PipelineConfig) -> Result<TrainState> {
    cfg.validate()?;
    let tc = &cfg.train;
    check_compatible(&prior.base, cfg)?;
    let base = prior.base.clone();
    let w1 = if tc.ablation.no_lo { 0.0 } else { tc.lambda1 };

    let mut la3d = init_adapter(&base, AdapterKind::Local3d, tc.seed)?;
    let mut ga3d = if tc.ablation.no_3dga {
        None
    } else {
        Some(init_adapter(&base, AdapterKind::Global3d, tc.seed)?)
    };

    let (train_set, val_set) = build_sets(cfg)?;
    let features: Vec<Vec<Vec<f64>>> =
        train_set.clips.iter().map(|c| featurize(&c.motion)).collect();
    let cues: Vec<SparseCue3D> = train_set.clips.iter().map(|c| extract_cues_3d(&c.motion)).collect();
    let trajs: Vec<RootTrajectory> =
        train_set.clips.iter().map(|c| root_trajectory(&c.motion)).collect();
    let val_features: Vec<Vec<Vec<f64>>> =
        val_set.clips.iter().map(|c| featurize(&c.motion)).collect();
    let val_cues: Vec<SparseCue3D> = val_set.clips.iter().map(|c| extract_cues_3d(&c.motion)).collect();
    let val_trajs: Vec<RootTrajectory> =
        val_set.clips.iter().map(|c| root_trajectory(&c.motion)).collect();

    let acfg = AdamConfig::with_lr(tc.learning_rate);
    let mut adam_l = AdamState::for_shapes(&la3d.named_tensors());
    let mut adam_g = ga3d.as_ref().map(|g| AdamState::for_shapes(&g.named_tensors()));
    let mut loss_history = Vec::new();
    let mut val_history = Vec::new();
    let mut step: u64 = 0;

    for epoch in 0..tc.epochs {
        let order = epoch_order(tc.seed, "3d-order", epoch, train_set.len());
        let mut pos: u64 = 0;
        for batch in order.chunks(tc.batch_size) {
            let mut grads_l = AdapterParams::zeros_like(&la3d);
            let mut grads_g = ga3d.as_ref().map(AdapterParams::zeros_like);
            let (mut sum_base, mut sum_o) = (0.0, 0.0);
            for &clip_idx in batch {
                let uid = epoch as u64 * 1_000_000 + pos;
                pos += 1;
                let clip = &train_set.clips[clip_idx];
                let x = &features[clip_idx];
                let draw = draw_item(tc, "3d-item", uid, x.len(), clip.text_id);

                let local = run_branch(&la3d, &ConditionRef::Local3d(&cues[clip_idx]))?;
                let global = match &ga3d {
                    Some(ga) if !draw.drop_global => {
                        Some(run_branch(ga, &ConditionRef::Global(&trajs[clip_idx]))?)
                    }
                    _ => None,
                };
                let mut inj = local.features.clone();
                if let Some(g) = &global {
                    inj.add_assign(&g.features)?;
                }
                let (y, cache) = base_forward_full(&base, x, draw.text_id, &draw.mask, Some(&inj))?;
                let (lb, d_y) = loss_base_grad(&y, x, &draw.mask)?;
                sum_base += lb;
                let d_inj = base_backward(&base, &cache, &d_y, None, true)?
                    .ok_or_else(|| CoreError::Internal("missing injection gradient".into()))?;

                let mut d_local = d_inj.clone();
                if let Some(g) = &global {
                    let (lo, d_g_o, d_l_o) = loss_ortho_grad(&g.features, &local.features)?;
                    sum_o += lo;
                    let mut d_global = d_inj.clone();
                    if w1 != 0.0 {
                        d_global.add_scaled(&d_g_o, w1)?;
                        d_local.add_scaled(&d_l_o, w1)?;
                    }
                    adapter_backward(
                        ga3d.as_ref().expect("global branch present"),
                        &g.cache,
                        &d_global,
                        grads_g.as_mut().expect("global grads present"),
                    )?;
                }
                adapter_backward(&la3d, &local.cache, &d_local, &mut grads_l)?;
            }

            let k = 1.0 / batch.len() as f64;
            scale_tensors(grads_l.tensors_mut(), k);
            adam_l.step(&acfg, la3d.tensors_mut(), &grads_l.named_tensors())?;
            if let (Some(ga), Some(gg), Some(ag)) = (&mut ga3d, &mut grads_g, &mut adam_g) {
                scale_tensors(gg.tensors_mut(), k);
                ag.step(&acfg, ga.tensors_mut(), &gg.named_tensors())?;
            }
            step += 1;
            let (mb, mo) = (sum_base * k, sum_o * k);
            loss_history.push(LossRow {
                step,
                l_base: mb,
                l_o: mo,
                l_3d: 0.0,
                total: mb + w1 * mo,
            });
        }

        let (mut v_base, mut v_o) = (0.0, 0.0);
        for (idx, clip) in val_set.clips.iter().enumerate() {
            let x = &val_features[idx];
            let mask = draw_val_mask(tc, idx as u64, x.len());
            let f_l = adapter_forward(&la3d, &ConditionRef::Local3d(&val_cues[idx]))?;
            let mut inj = f_l.clone();
            let mut f_g = None;
            if let Some(ga) = &ga3d {
                let f = adapter_forward(ga, &ConditionRef::Global(&val_trajs[idx]))?;
                inj.add_assign(&f)?;
                f_g = Some(f);
            }
            let (y, _) = base_forward_full(&base, x, Some(clip.text_id), &mask, Some(&inj))?;
            v_base += loss_base(&y, x, &mask)?;
            if let Some(f) = &f_g {
                v_o += loss_ortho(f, &f_l)?;
            }
        }
        let kv = 1.0 / val_set.len() as f64;
        val_history.push(ValRecord {
            epoch,
            l_base: v_base * kv,
            l_o: v_o * kv,
            l_3d: 0.0,
        });
    }

    let mut moments = BTreeMap::new();
    moments.insert("la3d".to_string(), adam_l);
    if let Some(ag) = adam_g {
        moments.insert("ga3d".to_string(), ag);
    }
    Ok(TrainState {
        stage: TrainStage::Adapter3d,
        base,
        la3d: Some(la3d),
        la2d: None,
        ga3d,
        epoch: tc.epochs,
        step,
        loss_history,
        val_history,
        moments,
    })
}

/// Trains the 2D local adapter against the frozen base, aligning its
/// features to the frozen 3D adapter from `prior` and warm starting the
/// global adapter from it.
///
/// The teacher's features enter only through the alignment loss; they
/// are never injected. A prior without a 3D adapter is accepted only
/// under the `no_l3d` ablation (cold start), which then has no alignment
/// measurement at all.
pub fn train_stage_2d(prior: &TrainState, cfg: &PipelineConfig) -> Result<TrainState> {
    cfg.validate()?;
    let tc = &cfg.train;
    check_compatible(&prior.base, cfg)?;
    let ab = &tc.ablation;
    let base = prior.base.clone();
    let w1 = if ab.no_lo { 0.0 } else { tc.lambda1 };
    let w2 = if ab.no_l3d { 0.0 } else { tc.lambda2 };

    let teacher: Option<&AdapterParams> = match &prior.la3d {
        Some(t) => {
            if t.kind != AdapterKind::Local3d {
                return Err(CoreError::ConditionMismatch {
                    expected: AdapterKind::Local3d.name(),
                    found: t.kind.name(),
                });
            }
            Some(t)
        }
        None if ab.no_l3d => None,
        None => {
            return Err(CoreError::Validation(
                "the 2d stage needs a state with a trained 3d adapter; run the 3d stage first \
                 or enable the no_l3d ablation for a cold start"
                    .into(),
            ))
        }
    };

    let student_kind = if ab.use_3d_input {
        AdapterKind::Local3d
    } else {
        AdapterKind::Local2d
    };
    let mut student = init_adapter(&base, student_kind, tc.seed)?;
    let mut ga3d = if ab.no_3dga {
        None
    } else {
        match &prior.ga3d {
            Some(g) => Some(g.clone()),
            None => Some(init_adapter(&base, AdapterKind::Global3d, tc.seed)?),
        }
    };
    let ga_trainable = ga3d.is_some() && !ab.freeze_3dga;

    let (train_set, val_set) = build_sets(cfg)?;
    let features: Vec<Vec<Vec<f64>>> =
        train_set.clips.iter().map(|c| featurize(&c.motion)).collect();
    let cues3d: Vec<SparseCue3D> =
        train_set.clips.iter().map(|c| extract_cues_3d(&c.motion)).collect();
    let trajs: Vec<RootTrajectory> =
        train_set.clips.iter().map(|c| root_trajectory(&c.motion)).collect();
    let targets: Vec<[f64; 3]> = train_set.clips.iter().map(|c| centroid(&c.motion)).collect();
    let val_features: Vec<Vec<Vec<f64>>> =
        val_set.clips.iter().map(|c| featurize(&c.motion)).collect();
    let val_cues3d: Vec<SparseCue3D> =
        val_set.clips.iter().map(|c| extract_cues_3d(&c.motion)).collect();
    let val_trajs: Vec<RootTrajectory> =
        val_set.clips.iter().map(|c| root_trajectory(&c.motion)).collect();
    // Held-out cameras are fixed per clip so validation is comparable
    // across epochs; no augmentation is applied to them.
    let val_cues2d: Vec<SparseCue2D> = val_set
        .clips
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            project_with_retries(
                &c.motion,
                centroid(&c.motion),
                derive_seed(tc.seed, "val-camera", idx as u64),
                &cfg.camera,
            )
        })
        .collect::<Result<_>>()?;

    let acfg = AdamConfig::with_lr(tc.learning_rate);
    let mut adam_s = AdamState::for_shapes(&student.named_tensors());
    let mut adam_g = match (&ga3d, ga_trainable) {
        (Some(g), true) => Some(AdamState::for_shapes(&g.named_tensors())),
        _ => None,
    };
    let mut loss_history = Vec::new();
    let mut val_history = Vec::new();
    let mut step: u64 = 0;

    for epoch in 0..tc.epochs {
        let order = epoch_order(tc.seed, "2d-order", epoch, train_set.len());
        let mut pos: u64 = 0;
        for batch in order.chunks(tc.batch_size) {
            let mut grads_s = AdapterParams::zeros_like(&student);
            let mut grads_g = match (&ga3d, ga_trainable) {
                (Some(g), true) => Some(AdapterParams::zeros_like(g)),
                _ => None,
            };
            let (mut sum_base, mut sum_o, mut sum_3d) = (0.0, 0.0, 0.0);
            for &clip_idx in batch {
                let uid = epoch as u64 * 1_000_000 + pos;
                pos += 1;
                let clip = &train_set.clips[clip_idx];
                let x = &features[clip_idx];
                let draw = draw_item(tc, "2d-item", uid, x.len(), clip.text_id);

                // The student sees a fresh augmented projection each time
                // the clip comes around; the teacher sees the clean 3D cues.
                let j2d;
                let cond_s = if ab.use_3d_input {
                    ConditionRef::Local3d(&cues3d[clip_idx])
                } else {
                    let clean = project_with_retries(
                        &clip.motion,
                        targets[clip_idx],
                        derive_seed(tc.seed, "camera", uid),
                        &cfg.camera,
                    )?;
                    j2d = augment(&clean, &cfg.augment, derive_seed(tc.seed, "augment", uid))?;
                    ConditionRef::Local2d(&j2d)
                };

                let local = run_branch(&student, &cond_s)?;
                let global = match &ga3d {
                    Some(ga) if !draw.drop_global => {
                        Some(run_branch(ga, &ConditionRef::Global(&trajs[clip_idx]))?)
                    }
                    _ => None,
                };
                let mut inj = local.features.clone();
                if let Some(g) = &global {
                    inj.add_assign(&g.features)?;
                }
                let (y, cache) = base_forward_full(&base, x, draw.text_id, &draw.mask, Some(&inj))?;
                let (lb, d_y) = loss_base_grad(&y, x, &draw.mask)?;
                sum_base += lb;
                let d_inj = base_backward(&base, &cache, &d_y, None, true)?
                    .ok_or_else(|| CoreError::Internal("missing injection gradient".into()))?;

                let mut d_student = d_inj.clone();
                if let Some(t) = teacher {
                    let f_t = adapter_forward(t, &ConditionRef::Local3d(&cues3d[clip_idx]))?;
                    let (l3, d_align) = loss_3d_align_grad(&f_t, &local.features)?;
                    sum_3d += l3;
                    if w2 != 0.0 {
                        d_student.add_scaled(&d_align, w2)?;
                    }
                }
                if let Some(g) = &global {
                    let (lo, d_g_o, d_l_o) = loss_ortho_grad(&g.features, &local.features)?;
                    sum_o += lo;
                    if w1 != 0.0 {
                        d_student.add_scaled(&d_l_o, w1)?;
                    }
                    if let Some(gg) = grads_g.as_mut() {
                        let mut d_global = d_inj.clone();
                        if w1 != 0.0 {
                            d_global.add_scaled(&d_g_o, w1)?;
                        }
                        adapter_backward(
                            ga3d.as_ref().expect("global branch present"),
                            &g.cache,
                            &d_global,
                            gg,
                        )?;
                    }
                }
                adapter_backward(&student, &local.cache, &d_student, &mut grads_s)?;
            }

            let k = 1.0 / batch.len() as f64;
            scale_tensors(grads_s.tensors_mut(), k);
            adam_s.step(&acfg, student.tensors_mut(), &grads_s.named_tensors())?;
            if let (Some(ga), Some(gg), Some(ag)) = (&mut ga3d, &mut grads_g, &mut adam_g) {
                scale_tensors(gg.tensors_mut(), k);
                ag.step(&acfg, ga.tensors_mut(), &gg.named_tensors())?;
            }
            step += 1;
            let (mb, mo, m3) = (sum_base * k, sum_o * k, sum_3d * k);
            loss_history.push(LossRow {
                step,
                l_base: mb,
                l_o: mo,
                l_3d: m3,
                total: mb + w1 * mo + w2 * m3,
            });
        }

        let (mut v_base, mut v_o, mut v_3d) = (0.0, 0.0, 0.0);
        for (idx, clip) in val_set.clips.iter().enumerate() {
            let x = &val_features[idx];
            let mask = draw_val_mask(tc, idx as u64, x.len());
            let cond_s = if ab.use_3d_input {
                ConditionRef::Local3d(&val_cues3d[idx])
            } else {
                ConditionRef::Local2d(&val_cues2d[idx])
            };
            let f_s = adapter_forward(&student, &cond_s)?;
            let mut inj = f_s.clone();
            let mut f_g = None;
            if let Some(ga) = &ga3d {
                let f = adapter_forward(ga, &ConditionRef::Global(&val_trajs[idx]))?;
                inj.add_assign(&f)?;
                f_g = Some(f);
            }
            let (y, _) = base_forward_full(&base, x, Some(clip.text_id), &mask, Some(&inj))?;
            v_base += loss_base(&y, x, &mask)?;
            if let Some(t) = teacher {
                let f_t = adapter_forward(t, &ConditionRef::Local3d(&val_cues3d[idx]))?;
                v_3d += crate::train::losses::loss_3d_align(&f_t, &f_s)?;
            }
            if let Some(f) = &f_g {
                v_o += loss_ortho(f, &f_s)?;
            }
        }
        let kv = 1.0 / val_set.len() as f64;
        val_history.push(ValRecord {
            epoch,
            l_base: v_base * kv,
            l_o: v_o * kv,
            l_3d: v_3d * kv,
        });
    }

    let mut moments = BTreeMap::new();
    moments.insert("la2d".to_string(), adam_s);
    if let Some(ag) = adam_g {
        moments.insert("ga3d".to_string(), ag);
    }
    Ok(TrainState {
        stage: TrainStage::Adapter2d,
        base,
        la3d: prior.la3d.clone(),
        la2d: Some(student),
        ga3d,
        epoch: tc.epochs,
        step,
        loss_history,
        val_history,
        moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.model.width = 16;
        cfg.model.blocks = 2;
        cfg.model.n_max = 16;
        cfg.data.clips = 8;
        cfg.data.val_clips = 4;
        cfg.data.clip_seconds = 1.2;
        cfg.data.fps = 10.0;
        cfg.train.batch_size = 4;
        cfg.train.epochs = 3;
        cfg.train.learning_rate = 2e-3;
        cfg.train.seed = 11;
        cfg
    }

    #[test]
    fn base_training_reduces_the_loss() {
        let state = train_base(&tiny_cfg()).unwrap();
        assert_eq!(state.loss_history.len() as u64, state.step);
        assert_eq!(state.val_history.len(), 3);
        let first = state.loss_history.first().unwrap().l_base;
        let last = state.loss_history.last().unwrap().l_base;
        assert!(
            last < first,
            "training did not reduce the loss: {first} -> {last}"
        );
        let v_first = state.val_history.first().unwrap().l_base;
        let v_last = state.val_history.last().unwrap().l_base;
        assert!(v_last < v_first, "validation did not improve: {v_first} -> {v_last}");
    }

    #[test]
    fn base_training_is_deterministic() {
        let a = train_base(&tiny_cfg()).unwrap();
        let b = train_base(&tiny_cfg()).unwrap();
        assert_eq!(a.base.param_hash(), b.base.param_hash());
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.val_history, b.val_history);
    }

    #[test]
    fn adapter_stage_leaves_the_base_frozen() {
        let mut cfg = tiny_cfg();
        cfg.train.epochs = 2;
        let prior = train_base(&cfg).unwrap();
        let before = prior.base.param_hash();
        let state = train_stage_3d(&prior, &cfg).unwrap();
        assert_eq!(state.base.param_hash(), before);
        let la3d = state.la3d.as_ref().unwrap();
        assert!(
            !la3d.projections_are_zero(),
            "training never moved the adapter projections"
        );
        assert!(state.ga3d.is_some());
        assert!(state.moments.contains_key("la3d") && state.moments.contains_key("ga3d"));
    }

    #[test]
    fn stage_2d_requires_a_teacher_state() {
        let mut cfg = tiny_cfg();
        cfg.train.epochs = 1;
        let prior = train_base(&cfg).unwrap();
        let err = train_stage_2d(&prior, &cfg).unwrap_err();
        assert!(matches!(err, CoreError::Validation(_)));
        cfg.train.ablation.no_l3d = true;
        let state = train_stage_2d(&prior, &cfg).unwrap();
        assert!(state.la2d.is_some());
        assert!(state.loss_history.iter().all(|r| r.l_3d == 0.0));
    }

    #[test]
    fn stage_2d_accounting_matches_the_terms() {
        let mut cfg = tiny_cfg();
        cfg.train.epochs = 2;
        let prior = train_base(&cfg).unwrap();
        let mid = train_stage_3d(&prior, &cfg).unwrap();
        let state = train_stage_2d(&mid, &cfg).unwrap();
        assert!(!state.loss_history.is_empty());
        let (l1, l2) = (cfg.train.lambda1, cfg.train.lambda2);
        for row in &state.loss_history {
            let want = row.l_base + l1 * row.l_o + l2 * row.l_3d;
            assert!(
                (row.total - want).abs() < 1e-9,
                "step {}: total {} does not match terms {}",
                row.step,
                row.total,
                want
            );
        }
        assert!(state.loss_history.iter().any(|r| r.l_3d > 0.0));
        assert!(state.val_history.iter().any(|r| r.l_3d > 0.0));
    }

    #[test]
    fn ablations_zero_the_weight_but_keep_the_measurement() {
        let mut cfg = tiny_cfg();
        cfg.train.epochs = 1;
        cfg.train.global_drop_prob = 0.0;
        let prior = train_base(&cfg).unwrap();
        cfg.train.ablation.no_lo = true;
        let state = train_stage_3d(&prior, &cfg).unwrap();
        for row in &state.loss_history {
            assert!((row.total - row.l_base).abs() < 1e-12);
        }
        assert!(
            state.loss_history.iter().any(|r| r.l_o != 0.0),
            "the raw orthogonality term should still be measured"
        );
    }

    #[test]
    fn stage_2d_supports_the_3d_input_ablation() {
        let mut cfg = tiny_cfg();
        cfg.train.epochs = 1;
        let prior = train_base(&cfg).unwrap();
        let mid = train_stage_3d(&prior, &cfg).unwrap();
        cfg.train.ablation.use_3d_input = true;
        let state = train_stage_2d(&mid, &cfg).unwrap();
        assert_eq!(state.la2d.as_ref().unwrap().kind, AdapterKind::Local3d);
    }

    #[test]
    fn frozen_global_adapter_stays_put_in_stage_2d() {
        let mut cfg = tiny_cfg();
        cfg.train.epochs = 1;
        let prior = train_base(&cfg).unwrap();
        let mid = train_stage_3d(&prior, &cfg).unwrap();
        let ga_before = mid.ga3d.as_ref().unwrap().param_hash();
        cfg.train.ablation.freeze_3dga = true;
        let state = train_stage_2d(&mid, &cfg).unwrap();
        assert_eq!(state.ga3d.as_ref().unwrap().param_hash(), ga_before);
        assert!(!state.moments.contains_key("ga3d"));

        cfg.train.ablation.freeze_3dga = false;
        let moved = train_stage_2d(&mid, &cfg).unwrap();
        assert_ne!(moved.ga3d.as_ref().unwrap().param_hash(), ga_before);
    }
}
