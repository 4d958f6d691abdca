//! Argument surface of the `reenact` binary.
//!
//! One subcommand per pipeline operation. Flags layer on top of the config
//! file, which layers on top of built-in defaults; every file-writing run
//! records the fully resolved configuration in a manifest next to its
//! primary output.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use reenact_core::config::{AblationConfig, TrainStage};
use reenact_core::synth::Pattern;

#[derive(Debug, Parser)]
#[command(
    name = "reenact",
    version,
    about = "Sparse joint-cue conditioning pipeline: clip synthesis, cue projection \
             and ingest, staged adapter training, guided sampling, physical metrics, \
             and semantic edits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a procedural motion clip
    Synth(SynthArgs),
    /// Project a motion through a sampled virtual camera into 2D cues
    Project(ProjectArgs),
    /// Convert raw pixel keypoints into canonical normalized cues
    Ingest(IngestArgs),
    /// Check a cue file against the representation invariants
    Validate(ValidateArgs),
    /// Run one training stage and write a checkpoint plus a loss table
    Train(TrainArgs),
    /// Generate motion from a checkpoint with classifier-free guidance
    Sample(SampleArgs),
    /// Score physical plausibility, optionally against a baseline
    Eval(EvalArgs),
    /// Apply deterministic semantic edits to a motion clip
    Edit(EditArgs),
}

/// Two-state flag with explicit spellings, so runs read unambiguously.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Training stage selector; mirrors the `train.stage` config field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    #[value(name = "base")]
    Base,
    #[value(name = "3d")]
    Adapter3d,
    #[value(name = "2d")]
    Adapter2d,
}

impl StageArg {
    pub fn stage(self) -> TrainStage {
        match self {
            StageArg::Base => TrainStage::Base,
            StageArg::Adapter3d => TrainStage::Adapter3d,
            StageArg::Adapter2d => TrainStage::Adapter2d,
        }
    }
}

/// Study switches; each occurrence flips one ablation on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblateArg {
    #[value(name = "no-3dga")]
    No3dga,
    #[value(name = "no-lo")]
    NoLo,
    #[value(name = "no-l3d")]
    NoL3d,
    #[value(name = "freeze-3dga")]
    Freeze3dga,
    #[value(name = "use-3d-input")]
    Use3dInput,
}

impl AblateArg {
    pub fn apply(self, ablation: &mut AblationConfig) {
        match self {
            AblateArg::No3dga => ablation.no_3dga = true,
            AblateArg::NoLo => ablation.no_lo = true,
            AblateArg::NoL3d => ablation.no_l3d = true,
            AblateArg::Freeze3dga => ablation.freeze_3dga = true,
            AblateArg::Use3dInput => ablation.use_3d_input = true,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Clip family: walk, jump, sway, or static
    #[arg(long)]
    pub pattern: Pattern,
    /// Clip length in seconds
    #[arg(long, default_value_t = 3.0)]
    pub duration: f64,
    /// Frames per second
    #[arg(long, default_value_t = 20.0)]
    pub fps: f64,
    /// Pattern amplitude in meters (step length, jump height, sway reach)
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Cycle period in seconds
    #[arg(long)]
    pub period: Option<f64>,
    /// Master seed for the phase and timing jitter
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Motion file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    /// Motion file to project
    #[arg(long)]
    pub motion: PathBuf,
    /// Config file supplying camera ranges and augmentation settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; camera and augmentation draw from named substreams
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Apply cue-space augmentation after projection
    #[arg(long, value_enum, default_value = "on")]
    pub augment: Switch,
    /// Cue file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw pixel keypoint track (JSON)
    #[arg(long)]
    pub keypoints: PathBuf,
    /// Packaged mapping name (human17, quadruped) or a mapping file path
    #[arg(long)]
    pub mapping: String,
    /// Cue file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Cue file to check (2D or 3D; the dims field decides)
    #[arg(long)]
    pub cues: PathBuf,
    /// Per-slot inter-frame displacement flagged as an outlier above this
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    /// Report file to write; defaults to `<cue file name>.report.json`
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Config file; flags override individual fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Stage to run: base, 3d, or 2d
    #[arg(long, value_enum)]
    pub stage: Option<StageArg>,
    /// Checkpoint to continue from (required for the adapter stages)
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Checkpoint file to write
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Loss table (CSV) to write; defaults to `<out>.losses.csv`
    #[arg(long)]
    pub losses: Option<PathBuf>,
    /// Print the fully resolved config as JSON and exit without training
    #[arg(long)]
    pub dump_config: bool,
    /// Master training seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Epochs for this stage
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Minibatch size
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the orthogonality term
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Weight of the 3D alignment term
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Training clips per stage
    #[arg(long)]
    pub clips: Option<usize>,
    /// Held-out validation clips
    #[arg(long)]
    pub val_clips: Option<usize>,
    /// Model width
    #[arg(long)]
    pub width: Option<usize>,
    /// Residual block count
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Ablation switches; repeatable
    #[arg(long, value_enum)]
    pub ablate: Vec<AblateArg>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Checkpoint to sample from
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// 2D cue file conditioning the motion branch
    #[arg(long)]
    pub cues: Option<PathBuf>,
    /// Prompt index into the checkpoint vocabulary
    #[arg(long)]
    pub text_id: Option<usize>,
    /// Config file supplying guidance defaults
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Guidance scale on the motion condition
    #[arg(long)]
    pub cfg_motion: Option<f64>,
    /// Guidance scale on the text condition
    #[arg(long)]
    pub cfg_text: Option<f64>,
    /// In-filling steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output length in frames; required when no cues pin it
    #[arg(long)]
    pub frames: Option<usize>,
    /// Seed for the unmasking schedule
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Motion file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Motion file to score
    #[arg(long)]
    pub motion: PathBuf,
    /// Baseline motion for the relative metrics
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Config file supplying the contact model thresholds
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    /// Motion file to edit
    #[arg(long)]
    pub motion: PathBuf,
    /// Scale vertical root displacement about the sequence minimum
    #[arg(long)]
    pub scale_root_y: Option<f64>,
    /// Set the horizontal arm spread angle in degrees; runs after root scaling
    #[arg(long)]
    pub arm_spread: Option<f64>,
    /// Motion file to write
    #[arg(long)]
    pub out: PathBuf,
}
