//! Run manifests recording what produced each output file.
//!
//! Every file-writing run drops a `<primary output>.manifest.json` beside
//! its primary output: the resolved configuration, the master seed, SHA-256
//! hashes of every input file, the paths written, and the argument list
//! needed to repeat the run. Output flags are stripped from the recorded
//! arguments, so a replay can redirect its outputs and compare bytes
//! against the originals.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use reenact_core::config::PipelineConfig;
use reenact_core::io::{save_json, sha256_file};
use reenact_core::{CoreError, Result};

/// Flags whose `(flag, value)` pairs are dropped from `replay_args`; their
/// paths appear under `outputs` keyed by the flag name instead.
pub const OUTPUT_FLAGS: [&str; 3] = ["--out", "--losses", "--report"];

/// Provenance record for one invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Wall-clock seconds since the Unix epoch at write time.
    pub timestamp_unix: u64,
    /// Master seed; subcommands without randomness record 0.
    pub seed: u64,
    /// Full configuration after defaults, config file, and flag overrides.
    pub config: PipelineConfig,
    /// Input path to SHA-256 of its bytes at run time.
    pub inputs: BTreeMap<String, String>,
    /// Output flag name to the path this run wrote.
    pub outputs: BTreeMap<String, String>,
    /// Parameter hash per model branch; populated by training runs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub param_hashes: BTreeMap<String, String>,
    /// Invocation arguments minus the program name and the output flags.
    pub replay_args: Vec<String>,
}

/// What a command hands to [`write_manifest`]. The first `outputs` entry is
/// the primary output; the manifest lands beside it.
pub struct ManifestSpec<'a> {
    pub subcommand: &'a str,
    pub seed: u64,
    pub config: &'a PipelineConfig,
    pub inputs: &'a [&'a Path],
    pub outputs: &'a [(&'a str, &'a Path)],
    pub param_hashes: BTreeMap<String, String>,
}

/// Hashes the inputs and writes the manifest next to the primary output.
/// Returns the manifest path.
pub fn write_manifest(spec: &ManifestSpec) -> Result<PathBuf> {
    let mut inputs = BTreeMap::new();
    for path in spec.inputs {
        inputs.insert(path.display().to_string(), sha256_file(path)?);
    }
    let mut outputs = BTreeMap::new();
    for (key, path) in spec.outputs {
        outputs.insert((*key).to_string(), path.display().to_string());
    }
    let (_, primary) = spec
        .outputs
        .first()
        .ok_or_else(|| CoreError::Internal("manifest spec lists no outputs".into()))?;

    let manifest = RunManifest {
        tool: "reenact".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: spec.subcommand.into(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        seed: spec.seed,
        config: spec.config.clone(),
        inputs,
        outputs,
        param_hashes: spec.param_hashes.clone(),
        replay_args: strip_output_flags(std::env::args().skip(1)),
    };
    let path = manifest_path(primary);
    save_json(&path, &manifest)?;
    Ok(path)
}

/// `x.json` becomes `x.json.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut name = primary.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Removes `--out <path>` pairs and `--out=path` forms for every output
/// flag, keeping everything else in order.
pub fn strip_output_flags(args: impl Iterator<Item = String>) -> Vec<String> {
    let mut kept = Vec::new();
    let mut args = args;
    while let Some(arg) = args.next() {
        if OUTPUT_FLAGS.contains(&arg.as_str()) {
            let _ = args.next();
            continue;
        }
        if OUTPUT_FLAGS
            .iter()
            .any(|flag| arg.starts_with(flag) && arg.as_bytes().get(flag.len()) == Some(&b'='))
        {
            continue;
        }
        kept.push(arg);
    }
    kept
}
