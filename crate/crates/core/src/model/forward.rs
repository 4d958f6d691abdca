//! Forward passes, feature injection, and manual reverse-mode gradients.
//!
//! The base network per frame t at block b computes
//! `h_out = h_in + point_w . tanh(tmix(h_in)) + point_b + inj_b`, where
//! `tmix` is a per-channel 3-tap temporal filter (zero-padded) and `inj_b`
//! is the summed adapter feature for that block. Adapters run the same
//! block structure over an encoded condition sequence and tap each block's
//! output through their zero-initialized projections. Backward passes
//! mirror the forward caches exactly; gradient containers reuse the
//! parameter structs.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

use super::features::{cond_matrix, ConditionRef};
use super::params::{AdapterParams, BlockParams, GeneratorParams};

/// Which frames the generator must reconstruct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub masked: Vec<bool>,
}

impl MaskSpec {
    pub fn all_masked(n: usize) -> Self {
        MaskSpec {
            masked: vec![true; n],
        }
    }

    pub fn none_masked(n: usize) -> Self {
        MaskSpec {
            masked: vec![false; n],
        }
    }

    pub fn masked_count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }
}

/// Per-block, per-frame adapter features: `blocks x frames x width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSeq {
    pub blocks: usize,
    pub frames: usize,
    pub width: usize,
    /// Row-major `[(block * frames + frame) * width + channel]`.
    pub data: Vec<f64>,
}

impl FeatureSeq {
    pub fn zeros(blocks: usize, frames: usize, width: usize) -> Self {
        FeatureSeq {
            blocks,
            frames,
            width,
            data: vec![0.0; blocks * frames * width],
        }
    }

    pub fn at(&self, block: usize, frame: usize) -> &[f64] {
        let o = (block * self.frames + frame) * self.width;
        &self.data[o..o + self.width]
    }

    pub fn at_mut(&mut self, block: usize, frame: usize) -> &mut [f64] {
        let o = (block * self.frames + frame) * self.width;
        &mut self.data[o..o + self.width]
    }

    pub fn same_shape(&self, other: &FeatureSeq) -> bool {
        self.blocks == other.blocks && self.frames == other.frames && self.width == other.width
    }

    pub fn add_assign(&mut self, other: &FeatureSeq) -> Result<()> {
        if !self.same_shape(other) {
            return Err(CoreError::ShapeMismatch(format!(
                "feature shapes differ: {}x{}x{} vs {}x{}x{}",
                self.blocks, self.frames, self.width, other.blocks, other.frames, other.width
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Adds `alpha * other` element-wise.
    pub fn add_scaled(&mut self, other: &FeatureSeq, alpha: f64) -> Result<()> {
        if !self.same_shape(other) {
            return Err(CoreError::ShapeMismatch(format!(
                "feature shapes differ: {}x{}x{} vs {}x{}x{}",
                self.blocks, self.frames, self.width, other.blocks, other.frames, other.width
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

/// `out[r] = sum_c w[r * cols + c] * x[c]` plus the bias.
fn affine(w: &[f64], b: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for c in 0..cols {
            acc += row[c] * x[c];
        }
        out[r] = acc;
    }
}

/// `out[c] += sum_r w[r * cols + c] * g[r]` (transpose application).
fn matvec_t_add(w: &[f64], rows: usize, cols: usize, g: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let gr = g[r];
        for c in 0..cols {
            out[c] += row[c] * gr;
        }
    }
}

/// `gw[r * cols + c] += g[r] * x[c]` (outer-product accumulation).
fn outer_add(gw: &mut [f64], rows: usize, cols: usize, g: &[f64], x: &[f64]) {
    for r in 0..rows {
        let row = &mut gw[r * cols..(r + 1) * cols];
        let gr = g[r];
        for c in 0..cols {
            row[c] += gr * x[c];
        }
    }
}

fn add_in_place(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Runs one residual block forward over the whole sequence, appending the
/// tanh activations to the cache (the backward pass recovers the tanh
/// derivative from them).
fn block_forward(
    block: &BlockParams,
    width: usize,
    h_in: &[Vec<f64>],
    inj: Option<(&FeatureSeq, usize)>,
    a_cache: &mut Vec<Vec<Vec<f64>>>,
) -> Vec<Vec<f64>> {
    let n = h_in.len();
    let mut a = vec![vec![0.0; width]; n];
    for t in 0..n {
        for i in 0..width {
            let mut acc = block.tmix[i * 3 + 1] * h_in[t][i];
            if t > 0 {
                acc += block.tmix[i * 3] * h_in[t - 1][i];
            }
            if t + 1 < n {
                acc += block.tmix[i * 3 + 2] * h_in[t + 1][i];
            }
            a[t][i] = acc.tanh();
        }
    }
    let mut h_out = vec![vec![0.0; width]; n];
    let mut z = vec![0.0; width];
    for t in 0..n {
        affine(&block.point_w, &block.point_b, width, width, &a[t], &mut z);
        for i in 0..width {
            h_out[t][i] = h_in[t][i] + z[i];
        }
        if let Some((feat, b)) = inj {
            add_in_place(&mut h_out[t], feat.at(b, t));
        }
    }
    a_cache.push(a);
    h_out
}

/// Backward through one residual block. `g_out` is the gradient at the
/// block output; returns the gradient at the block input and accumulates
/// weight gradients when `grads` is given.
fn block_backward(
    block: &BlockParams,
    grads: Option<&mut BlockParams>,
    width: usize,
    h_in: &[Vec<f64>],
    a: &[Vec<f64>],
    g_out: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = h_in.len();
    let mut du = vec![vec![0.0; width]; n];
    let mut da = vec![0.0; width];
    for t in 0..n {
        da.iter_mut().for_each(|v| *v = 0.0);
        matvec_t_add(&block.point_w, width, width, &g_out[t], &mut da);
        for i in 0..width {
            du[t][i] = da[i] * (1.0 - a[t][i] * a[t][i]);
        }
    }
    if let Some(g) = grads {
        for t in 0..n {
            outer_add(&mut g.point_w, width, width, &g_out[t], &a[t]);
            add_in_place(&mut g.point_b, &g_out[t]);
            for i in 0..width {
                if t > 0 {
                    g.tmix[i * 3] += du[t][i] * h_in[t - 1][i];
                }
                g.tmix[i * 3 + 1] += du[t][i] * h_in[t][i];
                if t + 1 < n {
                    g.tmix[i * 3 + 2] += du[t][i] * h_in[t + 1][i];
                }
            }
        }
    }
    let mut g_in = vec![vec![0.0; width]; n];
    for t in 0..n {
        for i in 0..width {
            // Identity path, own tap, and the neighbors that read h_in[t].
            let mut acc = g_out[t][i] + block.tmix[i * 3 + 1] * du[t][i];
            if t + 1 < n {
                acc += block.tmix[i * 3] * du[t + 1][i];
            }
            if t > 0 {
                acc += block.tmix[i * 3 + 2] * du[t - 1][i];
            }
            g_in[t][i] = acc;
        }
    }
    g_in
}

/// Everything the backward pass needs from a base forward.
pub struct ForwardCache {
    /// Input pose frames (read at unmasked positions only).
    pub x: Vec<Vec<f64>>,
    pub masked: Vec<bool>,
    /// Row index into the text table (0 is the null prompt).
    pub text_row: usize,
    /// `h[0]` after embedding, `h[b + 1]` after block b.
    h: Vec<Vec<Vec<f64>>>,
    a: Vec<Vec<Vec<f64>>>,
}

fn check_sequence(
    params: &GeneratorParams,
    frames_in: &[Vec<f64>],
    text_id: Option<usize>,
    mask: &MaskSpec,
) -> Result<usize> {
    let n = frames_in.len();
    if n == 0 {
        return Err(CoreError::Validation("empty input sequence".into()));
    }
    if n > params.dims.n_max {
        return Err(CoreError::Validation(format!(
            "sequence length {n} exceeds the model maximum {}",
            params.dims.n_max
        )));
    }
    for (t, f) in frames_in.iter().enumerate() {
        if f.len() != params.dims.pose_dim {
            return Err(CoreError::ShapeMismatch(format!(
                "frame {t} has {} values, pose dim is {}",
                f.len(),
                params.dims.pose_dim
            )));
        }
    }
    if mask.masked.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "mask length {} does not match sequence length {n}",
            mask.masked.len()
        )));
    }
    if let Some(id) = text_id {
        if id >= params.vocab.len() {
            return Err(CoreError::Validation(format!(
                "text id {id} out of vocabulary (size {})",
                params.vocab.len()
            )));
        }
    }
    Ok(n)
}

/// Full forward pass with optional injected features, returning the cache
/// for a later backward pass.
pub fn base_forward_full(
    params: &GeneratorParams,
    frames_in: &[Vec<f64>],
    text_id: Option<usize>,
    mask: &MaskSpec,
    inj: Option<&FeatureSeq>,
) -> Result<(Vec<Vec<f64>>, ForwardCache)> {
    let n = check_sequence(params, frames_in, text_id, mask)?;
    let d = params.dims.width;
    let p = params.dims.pose_dim;
    if let Some(feat) = inj {
        if feat.blocks != params.dims.blocks || feat.frames != n || feat.width != d {
            return Err(CoreError::ShapeMismatch(format!(
                "injected features {}x{}x{} do not match model {}x{n}x{d}",
                feat.blocks, feat.frames, feat.width, params.dims.blocks
            )));
        }
    }
    let text_row = text_id.map(|id| id + 1).unwrap_or(0);
    let text_vec = &params.text_table[text_row * d..(text_row + 1) * d];

    let mut h0 = vec![vec![0.0; d]; n];
    for t in 0..n {
        if mask.masked[t] {
            h0[t].copy_from_slice(&params.mask_token);
        } else {
            affine(&params.embed_w, &params.embed_b, d, p, &frames_in[t], &mut h0[t]);
        }
        add_in_place(&mut h0[t], text_vec);
    }

    let mut h_states = vec![h0];
    let mut a_cache = Vec::with_capacity(params.dims.blocks);
    for (b, block) in params.blocks.iter().enumerate() {
        let h_next = block_forward(
            block,
            d,
            h_states.last().expect("at least the embedding state"),
            inj.map(|f| (f, b)),
            &mut a_cache,
        );
        h_states.push(h_next);
    }

    let top = h_states.last().expect("states are non-empty");
    let mut y = vec![vec![0.0; p]; n];
    for t in 0..n {
        affine(&params.head_w, &params.head_b, p, d, &top[t], &mut y[t]);
    }

    let cache = ForwardCache {
        x: frames_in.to_vec(),
        masked: mask.masked.clone(),
        text_row,
        h: h_states,
        a: a_cache,
    };
    Ok((y, cache))
}

/// Forward pass without injection, discarding the cache.
pub fn base_forward(
    params: &GeneratorParams,
    frames_in: &[Vec<f64>],
    text_id: Option<usize>,
    mask: &MaskSpec,
) -> Result<Vec<Vec<f64>>> {
    base_forward_full(params, frames_in, text_id, mask, None).map(|(y, _)| y)
}

/// Backward through the base. `d_y` is the loss gradient at the output.
/// Accumulates into `grads` when given (frozen-base callers pass None) and
/// returns the per-block injection gradients when `want_inj` is set; those
/// feed the adapters' backward passes.
pub fn base_backward(
    params: &GeneratorParams,
    cache: &ForwardCache,
    d_y: &[Vec<f64>],
    mut grads: Option<&mut GeneratorParams>,
    want_inj: bool,
) -> Result<Option<FeatureSeq>> {
    let n = cache.x.len();
    let d = params.dims.width;
    let p = params.dims.pose_dim;
    if d_y.len() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "gradient has {} frames, cache has {n}",
            d_y.len()
        )));
    }
    let top = cache.h.last().expect("cache holds the top state");
    let mut dh = vec![vec![0.0; d]; n];
    for t in 0..n {
        if d_y[t].len() != p {
            return Err(CoreError::ShapeMismatch(format!(
                "gradient frame {t} has {} values, pose dim is {p}",
                d_y[t].len()
            )));
        }
        matvec_t_add(&params.head_w, p, d, &d_y[t], &mut dh[t]);
    }
    if let Some(g) = grads.as_deref_mut() {
        for t in 0..n {
            outer_add(&mut g.head_w, p, d, &d_y[t], &top[t]);
            add_in_place(&mut g.head_b, &d_y[t]);
        }
    }

    let mut inj_grad = want_inj.then(|| FeatureSeq::zeros(params.dims.blocks, n, d));
    for b in (0..params.dims.blocks).rev() {
        if let Some(fg) = inj_grad.as_mut() {
            for t in 0..n {
                fg.at_mut(b, t).copy_from_slice(&dh[t]);
            }
        }
        let block_grads = grads.as_deref_mut().map(|g| &mut g.blocks[b]);
        dh = block_backward(
            &params.blocks[b],
            block_grads,
            d,
            &cache.h[b],
            &cache.a[b],
            &dh,
        );
    }

    if let Some(g) = grads.as_deref_mut() {
        let row = cache.text_row;
        let text_grad = &mut g.text_table[row * d..(row + 1) * d];
        for t in 0..n {
            for i in 0..d {
                text_grad[i] += dh[t][i];
            }
            if cache.masked[t] {
                add_in_place(&mut g.mask_token, &dh[t]);
            } else {
                outer_add(&mut g.embed_w, d, p, &dh[t], &cache.x[t]);
                add_in_place(&mut g.embed_b, &dh[t]);
            }
        }
    }
    Ok(inj_grad)
}

/// Everything an adapter backward pass needs from its forward.
pub struct AdapterCache {
    /// Flattened condition inputs per frame.
    pub c: Vec<Vec<f64>>,
    /// `s[0]` after the encoder, `s[b + 1]` after trunk block b.
    s: Vec<Vec<Vec<f64>>>,
    a: Vec<Vec<Vec<f64>>>,
}

/// Adapter forward with cache: encodes the condition, runs the copied
/// block trunk, and taps each block output through its projection.
pub fn adapter_forward_full(
    adapter: &AdapterParams,
    condition: &ConditionRef<'_>,
) -> Result<(FeatureSeq, AdapterCache)> {
    if condition.kind_name() != adapter.kind.name() {
        return Err(CoreError::ConditionMismatch {
            expected: adapter.kind.name(),
            found: condition.kind_name(),
        });
    }
    let (c_rows, cond_dim) = cond_matrix(condition);
    let n = c_rows.len();
    if n == 0 {
        return Err(CoreError::Validation("empty condition sequence".into()));
    }
    if n > adapter.dims.n_max {
        return Err(CoreError::Validation(format!(
            "condition length {n} exceeds the model maximum {}",
            adapter.dims.n_max
        )));
    }
    let d = adapter.dims.width;

    let mut s0 = vec![vec![0.0; d]; n];
    for t in 0..n {
        affine(&adapter.enc_w, &adapter.enc_b, d, cond_dim, &c_rows[t], &mut s0[t]);
    }
    let mut s_states = vec![s0];
    let mut a_cache = Vec::with_capacity(adapter.dims.blocks);
    let mut features = FeatureSeq::zeros(adapter.dims.blocks, n, d);
    for (b, block) in adapter.blocks.iter().enumerate() {
        let s_next = block_forward(
            block,
            d,
            s_states.last().expect("at least the encoder state"),
            None,
            &mut a_cache,
        );
        let mut f = vec![0.0; d];
        for t in 0..n {
            affine(&adapter.proj_w[b], &adapter.proj_b[b], d, d, &s_next[t], &mut f);
            features.at_mut(b, t).copy_from_slice(&f);
        }
        s_states.push(s_next);
    }
    let cache = AdapterCache {
        c: c_rows,
        s: s_states,
        a: a_cache,
    };
    Ok((features, cache))
}

/// Adapter forward, discarding the cache.
pub fn adapter_forward(adapter: &AdapterParams, condition: &ConditionRef<'_>) -> Result<FeatureSeq> {
    adapter_forward_full(adapter, condition).map(|(f, _)| f)
}

/// Backward through an adapter given gradients at its tapped features.
/// Accumulates into `grads`, which must be shaped like the adapter.
pub fn adapter_backward(
    adapter: &AdapterParams,
    cache: &AdapterCache,
    d_feat: &FeatureSeq,
    grads: &mut AdapterParams,
) -> Result<()> {
    let d = adapter.dims.width;
    let n = cache.c.len();
    if d_feat.blocks != adapter.dims.blocks || d_feat.frames != n || d_feat.width != d {
        return Err(CoreError::ShapeMismatch(format!(
            "feature gradient {}x{}x{} does not match adapter {}x{n}x{d}",
            d_feat.blocks, d_feat.frames, d_feat.width, adapter.dims.blocks
        )));
    }
    let cond_dim = adapter.kind.cond_dim();

    let mut ds = vec![vec![0.0; d]; n];
    for b in (0..adapter.dims.blocks).rev() {
        let s_out = &cache.s[b + 1];
        for t in 0..n {
            let g = d_feat.at(b, t);
            outer_add(&mut grads.proj_w[b], d, d, g, &s_out[t]);
            add_in_place(&mut grads.proj_b[b], g);
            matvec_t_add(&adapter.proj_w[b], d, d, g, &mut ds[t]);
        }
        ds = block_backward(
            &adapter.blocks[b],
            Some(&mut grads.blocks[b]),
            d,
            &cache.s[b],
            &cache.a[b],
            &ds,
        );
    }
    for t in 0..n {
        outer_add(&mut grads.enc_w, d, cond_dim, &ds[t], &cache.c[t]);
        add_in_place(&mut grads.enc_b, &ds[t]);
    }
    Ok(())
}

/// Forward pass with a set of adapters: block b of the base receives the
/// sum of all adapters' block-b features in its residual stream. With
/// all-zero features the result is bitwise equal to [`base_forward`].
pub fn conditioned_forward(
    base: &GeneratorParams,
    adapters: &[&AdapterParams],
    conditions: &[ConditionRef<'_>],
    frames_in: &[Vec<f64>],
    text_id: Option<usize>,
    mask: &MaskSpec,
) -> Result<Vec<Vec<f64>>> {
    if adapters.len() != conditions.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "{} adapters but {} conditions",
            adapters.len(),
            conditions.len()
        )));
    }
    if adapters.is_empty() {
        return base_forward(base, frames_in, text_id, mask);
    }
    let mut total: Option<FeatureSeq> = None;
    for (adapter, condition) in adapters.iter().zip(conditions) {
        if condition.frame_count() != frames_in.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "condition has {} frames, input has {}",
                condition.frame_count(),
                frames_in.len()
            )));
        }
        let f = adapter_forward(adapter, condition)?;
        match total.as_mut() {
            None => total = Some(f),
            Some(acc) => acc.add_assign(&f)?,
        }
    }
    let total = total.expect("adapters are non-empty");
    base_forward_full(base, frames_in, text_id, mask, Some(&total)).map(|(y, _)| y)
}
