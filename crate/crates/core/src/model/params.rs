//! Parameter containers, initialization, and content hashing.
//!
//! All weight matrices are flat row-major `Vec<f64>` with shapes implied by
//! [`ModelDims`]. `tensor_views`/`tensor_views_mut` expose every tensor in
//! a fixed documented order; the optimizer, the gradient containers (which
//! reuse these structs), and the parameter hash all rely on that order
//! staying put.

use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::rng::substream;

use super::features::{GLOBAL_COND_DIM, LOCAL_2D_COND_DIM, LOCAL_3D_COND_DIM};

/// Core sizes of the generator. `pose_dim` is the flattened per-frame pose
/// vector length; `n_max` bounds sequence length in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub width: usize,
    pub blocks: usize,
    pub n_max: usize,
    pub pose_dim: usize,
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.blocks == 0 || self.n_max == 0 || self.pose_dim == 0 {
            return Err(CoreError::Validation(format!(
                "model dims must all be >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// One residual temporal block: a per-channel 3-tap temporal mix, a tanh,
/// and a pointwise linear transform, added back to the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    /// `width x 3`, taps over frames t-1, t, t+1 (zero-padded at the ends).
    pub tmix: Vec<f64>,
    /// `width x width` pointwise transform.
    pub point_w: Vec<f64>,
    /// `width` bias.
    pub point_b: Vec<f64>,
}

impl BlockParams {
    fn zeros(width: usize) -> Self {
        BlockParams {
            tmix: vec![0.0; width * 3],
            point_w: vec![0.0; width * width],
            point_b: vec![0.0; width],
        }
    }

    fn check_shapes(&self, width: usize) -> Result<()> {
        if self.tmix.len() != width * 3
            || self.point_w.len() != width * width
            || self.point_b.len() != width
        {
            return Err(CoreError::ShapeMismatch(format!(
                "block tensors {}x{}x{} do not match width {width}",
                self.tmix.len(),
                self.point_w.len(),
                self.point_b.len()
            )));
        }
        Ok(())
    }
}

/// The base generator's weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub dims: ModelDims,
    /// The closed prompt vocabulary, in embedding-table order.
    pub vocab: Vec<String>,
    /// `width x pose_dim` input embedding.
    pub embed_w: Vec<f64>,
    /// `width` embedding bias.
    pub embed_b: Vec<f64>,
    /// `width` learned token standing in for masked frames.
    pub mask_token: Vec<f64>,
    /// `(vocab.len() + 1) x width`; row 0 is the null prompt.
    pub text_table: Vec<f64>,
    pub blocks: Vec<BlockParams>,
    /// `pose_dim x width` output head.
    pub head_w: Vec<f64>,
    /// `pose_dim` head bias.
    pub head_b: Vec<f64>,
}

/// Which condition an adapter consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    /// 3D sparse cues, per-frame local condition.
    Local3d,
    /// 2D sparse cues, per-frame local condition.
    Local2d,
    /// Root trajectory, global condition.
    Global3d,
}

impl AdapterKind {
    /// Flattened per-frame condition vector length for this kind.
    pub fn cond_dim(self) -> usize {
        match self {
            AdapterKind::Local3d => LOCAL_3D_COND_DIM,
            AdapterKind::Local2d => LOCAL_2D_COND_DIM,
            AdapterKind::Global3d => GLOBAL_COND_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AdapterKind::Local3d => "local_3d",
            AdapterKind::Local2d => "local_2d",
            AdapterKind::Global3d => "global_3d",
        }
    }
}

/// An adapter branch: condition encoder, a full copy of the base blocks,
/// and per-block output projections (zero at init).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterParams {
    pub kind: AdapterKind,
    pub dims: ModelDims,
    /// `width x cond_dim` condition encoder.
    pub enc_w: Vec<f64>,
    /// `width` encoder bias.
    pub enc_b: Vec<f64>,
    pub blocks: Vec<BlockParams>,
    /// Per block: `width x width` output projection.
    pub proj_w: Vec<Vec<f64>>,
    /// Per block: `width` projection bias.
    pub proj_b: Vec<Vec<f64>>,
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Validation(format!(
            "non-finite value in tensor '{name}'"
        )));
    }
    Ok(())
}

impl GeneratorParams {
    /// All-zero parameters with the given shape, also the gradient
    /// container for the base: gradients are shaped exactly like weights.
    pub fn zeros_like(other: &GeneratorParams) -> GeneratorParams {
        let d = other.dims;
        GeneratorParams {
            dims: d,
            vocab: other.vocab.clone(),
            embed_w: vec![0.0; d.width * d.pose_dim],
            embed_b: vec![0.0; d.width],
            mask_token: vec![0.0; d.width],
            text_table: vec![0.0; (other.vocab.len() + 1) * d.width],
            blocks: (0..d.blocks).map(|_| BlockParams::zeros(d.width)).collect(),
            head_w: vec![0.0; d.pose_dim * d.width],
            head_b: vec![0.0; d.pose_dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        d.validate()?;
        if self.embed_w.len() != d.width * d.pose_dim
            || self.embed_b.len() != d.width
            || self.mask_token.len() != d.width
            || self.text_table.len() != (self.vocab.len() + 1) * d.width
            || self.head_w.len() != d.pose_dim * d.width
            || self.head_b.len() != d.pose_dim
            || self.blocks.len() != d.blocks
        {
            return Err(CoreError::ShapeMismatch(
                "generator tensor shapes do not match dims".into(),
            ));
        }
        for b in &self.blocks {
            b.check_shapes(d.width)?;
        }
        for (name, t) in self.named_tensors() {
            check_finite(name, t)?;
        }
        Ok(())
    }

    /// Tensors in the canonical order. The order is a compatibility
    /// contract: embed_w, embed_b, mask_token, text_table, per block
    /// (tmix, point_w, point_b), head_w, head_b.
    pub fn named_tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("embed_w", &self.embed_w),
            ("embed_b", &self.embed_b),
            ("mask_token", &self.mask_token),
            ("text_table", &self.text_table),
        ];
        for b in &self.blocks {
            out.push(("tmix", &b.tmix));
            out.push(("point_w", &b.point_w));
            out.push(("point_b", &b.point_b));
        }
        out.push(("head_w", &self.head_w));
        out.push(("head_b", &self.head_b));
        out
    }

    /// Mutable tensors, same order as [`GeneratorParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = vec![
            &mut self.embed_w,
            &mut self.embed_b,
            &mut self.mask_token,
            &mut self.text_table,
        ];
        for b in &mut self.blocks {
            out.push(&mut b.tmix);
            out.push(&mut b.point_w);
            out.push(&mut b.point_b);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    /// SHA-256 over all tensor values (little-endian f64 bytes) in
    /// canonical order. Bitwise-equal weights hash equal.
    pub fn param_hash(&self) -> String {
        hash_tensors(self.named_tensors())
    }
}

impl AdapterParams {
    pub fn zeros_like(other: &AdapterParams) -> AdapterParams {
        let d = other.dims;
        AdapterParams {
            kind: other.kind,
            dims: d,
            enc_w: vec![0.0; d.width * other.kind.cond_dim()],
            enc_b: vec![0.0; d.width],
            blocks: (0..d.blocks).map(|_| BlockParams::zeros(d.width)).collect(),
            proj_w: (0..d.blocks).map(|_| vec![0.0; d.width * d.width]).collect(),
            proj_b: (0..d.blocks).map(|_| vec![0.0; d.width]).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        d.validate()?;
        let c = self.kind.cond_dim();
        if self.enc_w.len() != d.width * c
            || self.enc_b.len() != d.width
            || self.blocks.len() != d.blocks
            || self.proj_w.len() != d.blocks
            || self.proj_b.len() != d.blocks
        {
            return Err(CoreError::ShapeMismatch(
                "adapter tensor shapes do not match dims".into(),
            ));
        }
        for b in &self.blocks {
            b.check_shapes(d.width)?;
        }
        for (w, b) in self.proj_w.iter().zip(&self.proj_b) {
            if w.len() != d.width * d.width || b.len() != d.width {
                return Err(CoreError::ShapeMismatch(
                    "adapter projection shapes do not match width".into(),
                ));
            }
        }
        for (name, t) in self.named_tensors() {
            check_finite(name, t)?;
        }
        Ok(())
    }

    /// Canonical tensor order: enc_w, enc_b, per block (tmix, point_w,
    /// point_b), per block (proj_w, proj_b).
    pub fn named_tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> =
            vec![("enc_w", &self.enc_w), ("enc_b", &self.enc_b)];
        for b in &self.blocks {
            out.push(("tmix", &b.tmix));
            out.push(("point_w", &b.point_w));
            out.push(("point_b", &b.point_b));
        }
        for (w, b) in self.proj_w.iter().zip(&self.proj_b) {
            out.push(("proj_w", w));
            out.push(("proj_b", b));
        }
        out
    }

    /// Mutable tensors, same order as [`AdapterParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = vec![&mut self.enc_w, &mut self.enc_b];
        for b in &mut self.blocks {
            out.push(&mut b.tmix);
            out.push(&mut b.point_w);
            out.push(&mut b.point_b);
        }
        for (w, b) in self.proj_w.iter_mut().zip(self.proj_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out
    }

    pub fn param_hash(&self) -> String {
        hash_tensors(self.named_tensors())
    }

    /// True while every output projection is exactly zero, the state in
    /// which the adapter cannot influence the base.
    pub fn projections_are_zero(&self) -> bool {
        self.proj_w.iter().flatten().all(|&v| v == 0.0)
            && self.proj_b.iter().flatten().all(|&v| v == 0.0)
    }
}

fn hash_tensors(tensors: Vec<(&'static str, &[f64])>) -> String {
    let mut hasher = Sha256::new();
    for (_, t) in tensors {
        for v in t {
            hasher.update(v.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

fn fill_normal(rng: &mut ChaCha12Rng, out: &mut [f64], sigma: f64) {
    let normal = Normal::new(0.0, sigma).expect("sigma is a positive literal");
    for v in out.iter_mut() {
        *v = normal.sample(rng);
    }
}

/// Initializes a base generator. Scales keep early activations O(1):
/// fan-in scaled matrices, near-identity temporal taps, zero biases.
/// Deterministic per seed; draws happen in canonical tensor order.
pub fn init_generator(dims: ModelDims, vocab: Vec<String>, seed: u64) -> Result<GeneratorParams> {
    dims.validate()?;
    if vocab.is_empty() {
        return Err(CoreError::Validation("prompt vocabulary is empty".into()));
    }
    let mut rng = substream(seed, "generator-init", 0);
    let d = dims.width;
    let p = dims.pose_dim;
    let mut params = GeneratorParams {
        dims,
        vocab,
        embed_w: vec![0.0; d * p],
        embed_b: vec![0.0; d],
        mask_token: vec![0.0; d],
        text_table: Vec::new(),
        blocks: Vec::new(),
        head_w: vec![0.0; p * d],
        head_b: vec![0.0; p],
    };
    params.text_table = vec![0.0; (params.vocab.len() + 1) * d];

    fill_normal(&mut rng, &mut params.embed_w, 1.0 / (p as f64).sqrt());
    fill_normal(&mut rng, &mut params.mask_token, 0.5);
    fill_normal(&mut rng, &mut params.text_table, 0.5);
    for _ in 0..dims.blocks {
        let mut block = BlockParams::zeros(d);
        fill_normal(&mut rng, &mut block.tmix, 0.1);
        for i in 0..d {
            // Center taps start near 1 so a fresh block mostly passes the
            // current frame through.
            block.tmix[i * 3 + 1] += 1.0;
        }
        fill_normal(&mut rng, &mut block.point_w, 0.5 / (d as f64).sqrt());
        params.blocks.push(block);
    }
    fill_normal(&mut rng, &mut params.head_w, 1.0 / (d as f64).sqrt());
    params.validate()?;
    Ok(params)
}

/// Initializes an adapter for `base`: block weights copied bitwise, output
/// projections zero, condition encoder drawn from a per-kind substream.
pub fn init_adapter(base: &GeneratorParams, kind: AdapterKind, seed: u64) -> Result<AdapterParams> {
    base.validate()?;
    let d = base.dims.width;
    let c = kind.cond_dim();
    let mut rng = substream(seed, kind.name(), 0);
    let mut adapter = AdapterParams {
        kind,
        dims: base.dims,
        enc_w: vec![0.0; d * c],
        enc_b: vec![0.0; d],
        blocks: base.blocks.clone(),
        proj_w: (0..base.dims.blocks).map(|_| vec![0.0; d * d]).collect(),
        proj_b: (0..base.dims.blocks).map(|_| vec![0.0; d]).collect(),
    };
    fill_normal(&mut rng, &mut adapter.enc_w, 1.0 / (c as f64).sqrt());
    adapter.validate()?;
    Ok(adapter)
}
