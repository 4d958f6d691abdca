//! Implementations behind the subcommands.
//!
//! Shared conventions: output paths pass through [`resolve_out`], which
//! honors the `REENACT_OUT_DIR` override for relative paths and creates
//! parent directories; every file-writing run ends with a manifest beside
//! its primary output; stdout carries a short human summary and the paths
//! written, never data another tool should parse.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use reenact_core::config::{PipelineConfig, TrainStage};
use reenact_core::cues::{SparseCue2D, SparseCue3D};
use reenact_core::model::AdapterKind;
use reenact_core::rng::derive_seed;
use reenact_core::skeleton::CueSlot;
use reenact_core::synth::SynthParams;
use reenact_core::train::{LossRow, TrainState};
use reenact_core::{augment, camera, checkpoint, cues, edit, ingest, io, metrics, model};
use reenact_core::{CoreError, Result};

use crate::cli::{
    Cli, Command, EditArgs, EvalArgs, IngestArgs, ProjectArgs, SampleArgs, Switch, SynthArgs,
    TrainArgs, ValidateArgs,
};
use crate::manifest::{write_manifest, ManifestSpec};

/// Environment override for the directory relative outputs land in.
pub const OUT_DIR_ENV: &str = "REENACT_OUT_DIR";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Project(args) => run_project(args),
        Command::Ingest(args) => run_ingest(args),
        Command::Validate(args) => run_validate(args),
        Command::Train(args) => run_train(args),
        Command::Sample(args) => run_sample(args),
        Command::Eval(args) => run_eval(args),
        Command::Edit(args) => run_edit(args),
    }
}

/// Applies the output-directory override to relative paths and creates the
/// parent directory. Input paths are never rewritten.
fn resolve_out(path: &Path) -> Result<PathBuf> {
    let resolved = match env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    };
    if let Some(parent) = resolved.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|err| CoreError::io(parent, err))?;
        }
    }
    Ok(resolved)
}

/// Built-in defaults, overlaid by the config file when one is given. Flag
/// overrides land on top inside each command.
fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(path) => io::load_json(path),
        None => Ok(PipelineConfig::default()),
    }
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let defaults = SynthParams::defaults_for(args.pattern);
    let params = SynthParams {
        amplitude: args.amplitude.unwrap_or(defaults.amplitude),
        period: args.period.unwrap_or(defaults.period),
        duration: args.duration,
        fps: args.fps,
    };
    let motion = reenact_core::synth::synth_motion(args.pattern, &params, args.seed)?;
    let out = resolve_out(&args.out)?;
    io::save_motion(&out, &motion)?;
    println!(
        "synthesized a {} clip: {} frames at {} fps",
        args.pattern.name(),
        motion.frame_count(),
        motion.fps
    );
    println!("wrote {}", out.display());
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "synth",
        seed: args.seed,
        config: &PipelineConfig::default(),
        inputs: &[],
        outputs: &[("out", &out)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run_project(args: ProjectArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.validate()?;
    let motion = io::load_motion(&args.motion)?;
    let cam = camera::sample_camera(
        motion.frame_count(),
        motion.fps,
        derive_seed(args.seed, "camera", 0),
        &cfg.camera,
        camera::subject_centroid(&motion),
    )?;
    let mut track = camera::project(&motion, &cam)?;
    if args.augment == Switch::On {
        track = augment::augment(&track, &cfg.augment, derive_seed(args.seed, "augment", 0))?;
    }
    let out = resolve_out(&args.out)?;
    io::save_json(&out, &track)?;
    println!(
        "projected {} frames into 2d cues ({}/{} entries valid, augment {})",
        track.frame_count(),
        track.valid_count(),
        track.frame_count() * CueSlot::COUNT,
        match args.augment {
            Switch::On => "on",
            Switch::Off => "off",
        }
    );
    println!("wrote {}", out.display());
    let mut inputs: Vec<&Path> = vec![args.motion.as_path()];
    if let Some(path) = &args.config {
        inputs.push(path);
    }
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "project",
        seed: args.seed,
        config: &cfg,
        inputs: &inputs,
        outputs: &[("out", &out)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run_ingest(args: IngestArgs) -> Result<()> {
    let track = ingest::load_keypoints(&args.keypoints)?;
    let (map, map_path) = match ingest::builtin_mapping(&args.mapping) {
        Some(map) => (map, None),
        None => {
            let path = PathBuf::from(&args.mapping);
            if !path.exists() {
                return Err(CoreError::Validation(format!(
                    "unknown mapping {:?}: not a packaged name (human17, quadruped) \
                     and no such file",
                    args.mapping
                )));
            }
            let map: ingest::MappingConfig = io::load_json(&path)?;
            map.validate()?;
            (map, Some(path))
        }
    };
    let cue_track = ingest::map_to_canonical(&track, &map)?;
    let out = resolve_out(&args.out)?;
    io::save_json(&out, &cue_track)?;
    println!(
        "ingested {} frames ({}/{} entries valid)",
        cue_track.frame_count(),
        cue_track.valid_count(),
        cue_track.frame_count() * CueSlot::COUNT
    );
    println!("wrote {}", out.display());
    let mut inputs: Vec<&Path> = vec![args.keypoints.as_path()];
    if let Some(path) = &map_path {
        inputs.push(path);
    }
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "ingest",
        seed: 0,
        config: &PipelineConfig::default(),
        inputs: &inputs,
        outputs: &[("out", &out)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run_validate(args: ValidateArgs) -> Result<()> {
    if !(args.threshold.is_finite() && args.threshold > 0.0) {
        return Err(CoreError::Validation(format!(
            "displacement threshold must be positive, got {}",
            args.threshold
        )));
    }
    let text = fs::read_to_string(&args.cues).map_err(|err| CoreError::io(&args.cues, err))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|err| CoreError::parse(&args.cues, err))?;
    let report = match value.get("dims").and_then(serde_json::Value::as_u64) {
        Some(2) => {
            let track: SparseCue2D =
                serde_json::from_str(&text).map_err(|err| CoreError::parse(&args.cues, err))?;
            cues::validate_cues(&track, args.threshold)
        }
        Some(3) => {
            let track: SparseCue3D =
                serde_json::from_str(&text).map_err(|err| CoreError::parse(&args.cues, err))?;
            cues::validate_cues(&track, args.threshold)
        }
        other => {
            return Err(CoreError::parse(
                &args.cues,
                format!("cue dims must be 2 or 3, got {other:?}"),
            ))
        }
    };

    println!(
        "cue track: {} frames, {}d, {}/{} entries valid",
        report.frames,
        report.dims,
        report.valid_entries,
        report.frames * CueSlot::COUNT
    );
    println!(
        "global norm {} ({}), root anchored: {}, padding clean: {}",
        report.global_norm,
        if report.normalized {
            "normalized"
        } else {
            "not normalized"
        },
        report.root_anchored,
        report.padding_clean
    );
    let outliers: Vec<_> = report.slots.iter().filter(|s| s.step_outlier).collect();
    if outliers.is_empty() {
        println!("no displacement outliers above {}", report.displacement_threshold);
    }
    for slot in outliers {
        println!(
            "displacement outlier: {} steps {:.6} into frame {}",
            slot.slot, slot.max_step, slot.max_step_frame
        );
    }
    for violation in &report.violations {
        println!("violation: {violation}");
    }

    let report_rel = match &args.report {
        Some(path) => path.clone(),
        None => {
            let name = args.cues.file_name().ok_or_else(|| {
                CoreError::Validation(format!(
                    "cue path {} has no file name",
                    args.cues.display()
                ))
            })?;
            let mut name = name.to_os_string();
            name.push(".report.json");
            PathBuf::from(name)
        }
    };
    let report_path = resolve_out(&report_rel)?;
    io::save_json(&report_path, &report)?;
    println!("wrote {}", report_path.display());
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "validate",
        seed: 0,
        config: &PipelineConfig::default(),
        inputs: &[&args.cues],
        outputs: &[("report", &report_path)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());

    if report.is_clean() {
        println!("result: clean");
        Ok(())
    } else {
        Err(CoreError::Validation(format!(
            "{} invariant violation(s); see the report",
            report.violations.len()
        )))
    }
}

fn branch_hashes(state: &TrainState) -> BTreeMap<String, String> {
    let mut hashes = BTreeMap::new();
    hashes.insert("base".to_string(), state.base.param_hash());
    if let Some(params) = &state.la3d {
        hashes.insert("la3d".to_string(), params.param_hash());
    }
    if let Some(params) = &state.la2d {
        hashes.insert("la2d".to_string(), params.param_hash());
    }
    if let Some(params) = &state.ga3d {
        hashes.insert("ga3d".to_string(), params.param_hash());
    }
    hashes
}

fn write_loss_table(path: &Path, rows: &[LossRow]) -> Result<()> {
    let mut text = String::from("step,L_base,L_O,L_3D,total\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step, row.l_base, row.l_o, row.l_3d, row.total
        ));
    }
    fs::write(path, &text).map_err(|err| CoreError::io(path, err))
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(stage) = args.stage {
        cfg.train.stage = stage.stage();
    }
    if let Some(value) = args.seed {
        cfg.train.seed = value;
    }
    if let Some(value) = args.epochs {
        cfg.train.epochs = value;
    }
    if let Some(value) = args.batch_size {
        cfg.train.batch_size = value;
    }
    if let Some(value) = args.lr {
        cfg.train.learning_rate = value;
    }
    if let Some(value) = args.lambda1 {
        cfg.train.lambda1 = value;
    }
    if let Some(value) = args.lambda2 {
        cfg.train.lambda2 = value;
    }
    if let Some(value) = args.clips {
        cfg.data.clips = value;
    }
    if let Some(value) = args.val_clips {
        cfg.data.val_clips = value;
    }
    if let Some(value) = args.width {
        cfg.model.width = value;
    }
    if let Some(value) = args.blocks {
        cfg.model.blocks = value;
    }
    for ablate in &args.ablate {
        ablate.apply(&mut cfg.train.ablation);
    }
    cfg.validate()?;

    if args.dump_config {
        let text = serde_json::to_string_pretty(&cfg)
            .map_err(|err| CoreError::Internal(format!("config serialization failed: {err}")))?;
        println!("{text}");
        return Ok(());
    }
    let out_arg = args.out.as_ref().ok_or_else(|| {
        CoreError::Validation("--out is required unless --dump-config is set".into())
    })?;

    let prior = match &args.from {
        Some(path) => Some(checkpoint::load_checkpoint(path)?),
        None => None,
    };
    let state = match cfg.train.stage {
        TrainStage::Base => {
            if prior.is_some() {
                return Err(CoreError::Validation(
                    "base pretraining starts from scratch; drop --from".into(),
                ));
            }
            reenact_core::train::train_base(&cfg)?
        }
        TrainStage::Adapter3d => {
            let prior = prior.ok_or_else(|| {
                CoreError::Validation("the 3d stage needs --from <base checkpoint>".into())
            })?;
            reenact_core::train::train_stage_3d(&prior.to_state(), &cfg)?
        }
        TrainStage::Adapter2d => {
            let prior = prior.ok_or_else(|| {
                CoreError::Validation("the 2d stage needs --from <3d checkpoint>".into())
            })?;
            reenact_core::train::train_stage_2d(&prior.to_state(), &cfg)?
        }
    };

    let out = resolve_out(out_arg)?;
    let losses = match &args.losses {
        Some(path) => resolve_out(path)?,
        None => {
            let mut name = out.as_os_str().to_os_string();
            name.push(".losses.csv");
            PathBuf::from(name)
        }
    };
    let ck = checkpoint::Checkpoint::from_state(&state, &cfg);
    checkpoint::save_checkpoint(&out, &ck)?;
    write_loss_table(&losses, &state.loss_history)?;

    println!(
        "stage {} finished: {} clips, {} epochs, {} steps",
        cfg.train.stage.name(),
        cfg.data.clips,
        cfg.train.epochs,
        state.loss_history.len()
    );
    if let Some(last) = state.loss_history.last() {
        println!("final training loss {:.6}", last.total);
    }
    if let Some(last) = state.val_history.last() {
        println!(
            "final validation: L_base {:.6}, L_O {:.6}, L_3D {:.6}",
            last.l_base, last.l_o, last.l_3d
        );
    }
    println!("wrote {}", out.display());
    println!("wrote {}", losses.display());

    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(path) = &args.config {
        inputs.push(path);
    }
    if let Some(path) = &args.from {
        inputs.push(path);
    }
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "train",
        seed: cfg.train.seed,
        config: &cfg,
        inputs: &inputs,
        outputs: &[("out", &out), ("losses", &losses)],
        param_hashes: branch_hashes(&state),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run_sample(args: SampleArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    cfg.validate()?;
    let ck = checkpoint::load_checkpoint(&args.checkpoint)?;
    let state = ck.to_state();
    let track: Option<SparseCue2D> = match &args.cues {
        Some(path) => Some(io::load_json(path)?),
        None => None,
    };
    if let Some(track) = &track {
        track.validate()?;
    }
    if let Some(id) = args.text_id {
        let vocab = state.base.vocab.len();
        if id >= vocab {
            return Err(CoreError::Validation(format!(
                "text id {id} out of range for a vocabulary of {vocab} prompts"
            )));
        }
    }
    // Inference drives the base through the 2d local branch alone. Without
    // cues the branch is never evaluated, so a checkpoint lacking one still
    // samples unconditionally through a zero-initialized stand-in.
    let la2d = match (&state.la2d, &track) {
        (Some(adapter), _) if adapter.kind == AdapterKind::Local2d => adapter.clone(),
        (Some(adapter), Some(_)) => {
            return Err(CoreError::ConditionMismatch {
                expected: "local_2d",
                found: adapter.kind.name(),
            })
        }
        (_, None) => model::init_adapter(&state.base, AdapterKind::Local2d, 0)?,
        (None, Some(_)) => {
            return Err(CoreError::Validation(
                "checkpoint has no 2d branch to consume the cues".into(),
            ))
        }
    };

    cfg.sampling.cfg_motion = args.cfg_motion.unwrap_or(cfg.sampling.cfg_motion);
    cfg.sampling.cfg_text = args.cfg_text.unwrap_or(cfg.sampling.cfg_text);
    cfg.sampling.steps = args.steps.unwrap_or(cfg.sampling.steps);
    let spec = model::SamplingSpec {
        s_motion: cfg.sampling.cfg_motion,
        s_text: cfg.sampling.cfg_text,
        steps: cfg.sampling.steps,
        seed: args.seed,
        n_frames: args.frames,
    };
    let motion = model::cfg_sample(
        &state.base,
        &la2d,
        track.as_ref(),
        args.text_id,
        &ck.skeleton,
        ck.fps,
        &spec,
    )?;
    let out = resolve_out(&args.out)?;
    io::save_motion(&out, &motion)?;
    println!(
        "sampled {} frames at {} fps (cfg motion {}, cfg text {}, {} steps)",
        motion.frame_count(),
        ck.fps,
        spec.s_motion,
        spec.s_text,
        spec.steps
    );
    println!("wrote {}", out.display());
    let mut inputs: Vec<&Path> = vec![args.checkpoint.as_path()];
    if let Some(path) = &args.cues {
        inputs.push(path);
    }
    if let Some(path) = &args.config {
        inputs.push(path);
    }
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "sample",
        seed: args.seed,
        config: &cfg,
        inputs: &inputs,
        outputs: &[("out", &out)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}

/// On-disk shape of the eval report.
#[derive(Debug, Serialize, Deserialize)]
struct EvalReport {
    method: metrics::MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<metrics::MetricReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative: Option<metrics::RelativeMetrics>,
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    cfg.contact.validate()?;
    let motion = io::load_motion(&args.motion)?;
    let method = metrics::compute_metrics(&motion, &cfg.contact)?;
    let (baseline, relative) = match &args.baseline {
        Some(path) => {
            let reference = io::load_motion(path)?;
            let reference = metrics::compute_metrics(&reference, &cfg.contact)?;
            let relative = metrics::relative_metrics(&method, &reference);
            (Some(reference), Some(relative))
        }
        None => (None, None),
    };

    println!(
        "jitter {:.6}  foot skate {:.4}  float {:.4}  slide {:.6}",
        method.jitter, method.fsr, method.ffl, method.fsd
    );
    if let Some(relative) = &relative {
        println!(
            "relative to baseline: r_jitter {:.6}  r_fsr {:.6}  r_ffl {:.6}  r_fsd {:.6}",
            relative.r_jitter, relative.r_fsr, relative.r_ffl, relative.r_fsd
        );
    }
    let report = EvalReport {
        method,
        baseline,
        relative,
    };
    let out = resolve_out(&args.out)?;
    io::save_json(&out, &report)?;
    println!("wrote {}", out.display());
    let mut inputs: Vec<&Path> = vec![args.motion.as_path()];
    if let Some(path) = &args.baseline {
        inputs.push(path);
    }
    if let Some(path) = &args.config {
        inputs.push(path);
    }
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "eval",
        seed: 0,
        config: &cfg,
        inputs: &inputs,
        outputs: &[("out", &out)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn run_edit(args: EditArgs) -> Result<()> {
    let mut motion = io::load_motion(&args.motion)?;
    // Fixed composition order: root scaling, then arm spread.
    if let Some(scale) = args.scale_root_y {
        motion = edit::edit_root_vertical(&motion, scale)?;
    }
    if let Some(angle) = args.arm_spread {
        motion = edit::edit_arm_spread(&motion, angle)?;
    }
    let out = resolve_out(&args.out)?;
    io::save_motion(&out, &motion)?;
    match (args.scale_root_y, args.arm_spread) {
        (None, None) => println!("no edit flags given; copied the clip unchanged"),
        (scale, angle) => {
            let mut applied = Vec::new();
            if let Some(scale) = scale {
                applied.push(format!("root vertical x{scale}"));
            }
            if let Some(angle) = angle {
                applied.push(format!("arm spread {angle} deg"));
            }
            println!("applied {}", applied.join(", then "));
        }
    }
    println!("wrote {}", out.display());
    let manifest = write_manifest(&ManifestSpec {
        subcommand: "edit",
        seed: 0,
        config: &PipelineConfig::default(),
        inputs: &[&args.motion],
        outputs: &[("out", &out)],
        param_hashes: BTreeMap::new(),
    })?;
    println!("wrote {}", manifest.display());
    Ok(())
}
