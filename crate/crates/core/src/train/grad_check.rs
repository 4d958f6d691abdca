//! Central finite-difference verification of the analytic gradients.
//!
//! The checker perturbs one coordinate at a time of a flattened parameter
//! vector, so it is meant for toy sizes only. Relative error uses
//! `|fd - an| / max(|fd|, |an|, 1e-6)`, which stays meaningful when a
//! coordinate's gradient is near zero.

use crate::error::{CoreError, Result};

/// Concatenates a canonical tensor list into one flat vector.
pub fn flatten_tensors(tensors: &[(&'static str, &[f64])]) -> Vec<f64> {
    let total: usize = tensors.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(total);
    for (_, t) in tensors {
        out.extend_from_slice(t);
    }
    out
}

/// Writes a flat vector back into a canonical tensor list.
pub fn unflatten_tensors(tensors: Vec<&mut Vec<f64>>, flat: &[f64]) -> Result<()> {
    let total: usize = tensors.iter().map(|t| t.len()).sum();
    if total != flat.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "flat vector has {} values, tensors hold {total}",
            flat.len()
        )));
    }
    let mut offset = 0;
    for t in tensors {
        let len = t.len();
        t.copy_from_slice(&flat[offset..offset + len]);
        offset += len;
    }
    Ok(())
}

/// Compares analytic gradients against central finite differences at the
/// probed coordinates and returns the maximum relative error.
pub fn grad_check(
    mut f: impl FnMut(&[f64]) -> f64,
    theta: &[f64],
    analytic: &[f64],
    eps: f64,
    probes: &[usize],
) -> f64 {
    assert_eq!(
        theta.len(),
        analytic.len(),
        "parameter and gradient vectors must align"
    );
    let mut work = theta.to_vec();
    let mut worst: f64 = 0.0;
    for &i in probes {
        let orig = work[i];
        work[i] = orig + eps;
        let hi = f(&work);
        work[i] = orig - eps;
        let lo = f(&work);
        work[i] = orig;
        let fd = (hi - lo) / (2.0 * eps);
        let an = analytic[i];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}
