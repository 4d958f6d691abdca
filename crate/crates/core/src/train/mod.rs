//! Progressive two-stage training of the adapter branches.
//!
//! Stage order: base pretraining (masked reconstruction alone), then the
//! 3D stage (3D local + global adapters, orthogonality regularizer), then
//! the 2D stage (2D local student + warm global adapter, with the frozen
//! 3D local branch as an alignment teacher). The base is frozen in both
//! adapter stages; the teacher is frozen in stage two.

mod data;
mod grad_check;
mod losses;
mod optimizer;
mod stages;

pub use data::{build_clipset, Clip, ClipSet};
pub use grad_check::{flatten_tensors, grad_check, unflatten_tensors};
pub use losses::{
    loss_3d_align, loss_3d_align_grad, loss_base, loss_base_grad, loss_ortho, loss_ortho_grad,
};
pub use optimizer::{AdamConfig, AdamState};
pub use stages::{
    train_base, train_stage_2d, train_stage_3d, LossRow, TrainState, ValRecord,
};
