//! A small conditional motion generator plus adapter branches.
//!
//! The generator is a masked-frame reconstruction network: pose frames are
//! embedded, masked positions are replaced by a learned token, a prompt
//! embedding is added, a stack of residual temporal blocks mixes the
//! sequence, and a linear head predicts every frame. Adapters are full
//! copies of the block stack driven by an encoded condition sequence; each
//! block's tapped feature passes through a zero-initialized projection and
//! is added to the matching base block's residual stream, so a fresh
//! adapter leaves the base untouched bit for bit.

mod features;
mod forward;
mod params;
mod sample;

pub use features::{
    cond_matrix, defeaturize, featurize, pose_dim, ConditionRef, GLOBAL_COND_DIM,
    LOCAL_2D_COND_DIM, LOCAL_3D_COND_DIM,
};
pub use forward::{
    adapter_backward, adapter_forward, adapter_forward_full, base_backward, base_forward,
    base_forward_full, conditioned_forward, AdapterCache, FeatureSeq, ForwardCache, MaskSpec,
};
pub use params::{
    init_adapter, init_generator, AdapterKind, AdapterParams, BlockParams, GeneratorParams,
    ModelDims,
};
pub use sample::{cfg_sample, unmask_schedule, SamplingSpec};
