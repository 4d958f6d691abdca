//! The three loss terms and their analytic gradients.
//!
//! `loss_base` is mean squared error over masked frames only, normalized
//! by masked-frame count times pose width. `loss_3d_align` is the mean
//! over (block, frame) of the unsquared L2 norm of the feature difference.
//! `loss_ortho` is the mean squared cosine between global and local
//! features, defined as 0 whenever either vector's norm falls below 1e-12
//! (zero-initialized adapters start exactly there).

use crate::error::{CoreError, Result};
use crate::model::{FeatureSeq, MaskSpec};

/// Norm floor below which cosine terms are treated as orthogonal and
/// alignment gradients as zero.
const DEGENERATE_NORM: f64 = 1e-12;

fn check_frames(pred: &[Vec<f64>], target: &[Vec<f64>], mask: &MaskSpec) -> Result<usize> {
    if pred.len() != target.len() || pred.len() != mask.masked.len() {
        return Err(CoreError::ShapeMismatch(format!(
            "prediction {} / target {} / mask {} lengths differ",
            pred.len(),
            target.len(),
            mask.masked.len()
        )));
    }
    let m = mask.masked_count();
    if m == 0 {
        return Err(CoreError::Validation(
            "mask selects no frames to reconstruct".into(),
        ));
    }
    for (t, (a, b)) in pred.iter().zip(target).enumerate() {
        if a.len() != b.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "frame {t}: prediction width {} vs target {}",
                a.len(),
                b.len()
            )));
        }
    }
    Ok(m)
}

/// Mean squared error over all entries of masked frames.
pub fn loss_base(pred: &[Vec<f64>], target: &[Vec<f64>], mask: &MaskSpec) -> Result<f64> {
    let masked_frames = check_frames(pred, target, mask)?;
    let p = pred[0].len();
    let denom = (masked_frames * p) as f64;
    let mut acc = 0.0;
    for (t, (a, b)) in pred.iter().zip(target).enumerate() {
        if !mask.masked[t] {
            continue;
        }
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            acc += d * d;
        }
    }
    Ok(acc / denom)
}

/// [`loss_base`] plus its gradient with respect to the prediction.
pub fn loss_base_grad(
    pred: &[Vec<f64>],
    target: &[Vec<f64>],
    mask: &MaskSpec,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let masked_frames = check_frames(pred, target, mask)?;
    let p = pred[0].len();
    let denom = (masked_frames * p) as f64;
    let mut acc = 0.0;
    let mut grad = vec![vec![0.0; p]; pred.len()];
    for (t, (a, b)) in pred.iter().zip(target).enumerate() {
        if !mask.masked[t] {
            continue;
        }
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let d = x - y;
            acc += d * d;
            grad[t][k] = 2.0 * d / denom;
        }
    }
    Ok((acc / denom, grad))
}

fn check_features(a: &FeatureSeq, b: &FeatureSeq) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(CoreError::ShapeMismatch(format!(
            "feature shapes differ: {}x{}x{} vs {}x{}x{}",
            a.blocks, a.frames, a.width, b.blocks, b.frames, b.width
        )));
    }
    Ok((a.blocks * a.frames) as f64)
}

/// Mean over (block, frame) of the L2 norm of the feature difference.
/// `f3` is the frozen teacher, `f2` the trainable student.
pub fn loss_3d_align(f3: &FeatureSeq, f2: &FeatureSeq) -> Result<f64> {
    let m = check_features(f3, f2)?;
    let mut acc = 0.0;
    for b in 0..f3.blocks {
        for t in 0..f3.frames {
            let x = f3.at(b, t);
            let y = f2.at(b, t);
            let mut sq = 0.0;
            for (u, v) in x.iter().zip(y) {
                let d = v - u;
                sq += d * d;
            }
            acc += sq.sqrt();
        }
    }
    Ok(acc / m)
}

/// [`loss_3d_align`] plus its gradient with respect to the student `f2`.
/// At an exactly matched position the norm is not differentiable; the
/// zero subgradient is used.
pub fn loss_3d_align_grad(f3: &FeatureSeq, f2: &FeatureSeq) -> Result<(f64, FeatureSeq)> {
    let m = check_features(f3, f2)?;
    let mut acc = 0.0;
    let mut grad = FeatureSeq::zeros(f2.blocks, f2.frames, f2.width);
    for b in 0..f3.blocks {
        for t in 0..f3.frames {
            let x = f3.at(b, t);
            let y = f2.at(b, t);
            let mut sq = 0.0;
            for (u, v) in x.iter().zip(y) {
                let d = v - u;
                sq += d * d;
            }
            let norm = sq.sqrt();
            acc += norm;
            if norm >= DEGENERATE_NORM {
                let g = grad.at_mut(b, t);
                for (k, (u, v)) in x.iter().zip(y).enumerate() {
                    g[k] = (v - u) / (norm * m);
                }
            }
        }
    }
    Ok((acc / m, grad))
}

/// Mean over (block, frame) of the squared cosine between the global
/// feature `g` and the local feature `l`.
pub fn loss_ortho(g: &FeatureSeq, l: &FeatureSeq) -> Result<f64> {
    let m = check_features(g, l)?;
    let mut acc = 0.0;
    for b in 0..g.blocks {
        for t in 0..g.frames {
            let x = g.at(b, t);
            let y = l.at(b, t);
            let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
            for (u, v) in x.iter().zip(y) {
                dot += u * v;
                nx += u * u;
                ny += v * v;
            }
            let (nx, ny) = (nx.sqrt(), ny.sqrt());
            if nx >= DEGENERATE_NORM && ny >= DEGENERATE_NORM {
                let c = dot / (nx * ny);
                acc += c * c;
            }
        }
    }
    Ok(acc / m)
}

/// [`loss_ortho`] plus gradients with respect to both feature sets.
pub fn loss_ortho_grad(
    g: &FeatureSeq,
    l: &FeatureSeq,
) -> Result<(f64, FeatureSeq, FeatureSeq)> {
    let m = check_features(g, l)?;
    let mut acc = 0.0;
    let mut dg = FeatureSeq::zeros(g.blocks, g.frames, g.width);
    let mut dl = FeatureSeq::zeros(l.blocks, l.frames, l.width);
    for b in 0..g.blocks {
        for t in 0..g.frames {
            let x = g.at(b, t);
            let y = l.at(b, t);
            let (mut dot, mut nx2, mut ny2) = (0.0, 0.0, 0.0);
            for (u, v) in x.iter().zip(y) {
                dot += u * v;
                nx2 += u * u;
                ny2 += v * v;
            }
            let (nx, ny) = (nx2.sqrt(), ny2.sqrt());
            if nx < DEGENERATE_NORM || ny < DEGENERATE_NORM {
                continue;
            }
            let c = dot / (nx * ny);
            acc += c * c;
            // d(cos^2)/dx = 2c * (y / (|x||y|) - c * x / |x|^2), then the
            // 1/m average.
            let gx = dg.at_mut(b, t);
            for (k, (u, v)) in x.iter().zip(y).enumerate() {
                gx[k] = 2.0 * c * (v / (nx * ny) - c * u / nx2) / m;
            }
            let gy = dl.at_mut(b, t);
            for (k, (u, v)) in x.iter().zip(y).enumerate() {
                gy[k] = 2.0 * c * (u / (nx * ny) - c * v / ny2) / m;
            }
        }
    }
    Ok((acc / m, dg, dl))
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use crate::rng::substream;

    use super::*;

    fn fill_random(f: &mut FeatureSeq, seed: u64) {
        let mut rng = substream(seed, "loss-fill", 0);
        for v in &mut f.data {
            *v = rng.random::<f64>() - 0.5;
        }
    }

    #[test]
    fn base_loss_zero_on_exact_match() {
        let pred = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let mask = MaskSpec {
            masked: vec![true, false],
        };
        assert_eq!(loss_base(&pred, &pred, &mask).unwrap(), 0.0);
    }

    #[test]
    fn base_loss_constant_offset_squares() {
        let target = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![0.0, 0.0, 1.0]];
        let c = 0.25;
        let pred: Vec<Vec<f64>> = target
            .iter()
            .map(|f| f.iter().map(|v| v + c).collect())
            .collect();
        let mask = MaskSpec {
            masked: vec![true, true, false],
        };
        let loss = loss_base(&pred, &target, &mask).unwrap();
        assert!((loss - c * c).abs() < 1e-15);
    }

    #[test]
    fn base_loss_matches_a_direct_recomputation() {
        let mut rng = substream(7, "base-loss", 0);
        let n = 3;
        let p = 5;
        let pred: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let target: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mask = MaskSpec {
            masked: vec![true, false, true],
        };
        let loss = loss_base(&pred, &target, &mask).unwrap();
        let mut acc = 0.0;
        for t in [0usize, 2] {
            for k in 0..p {
                acc += (pred[t][k] - target[t][k]).powi(2);
            }
        }
        let expected = acc / (2.0 * p as f64);
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn base_loss_rejects_empty_mask() {
        let pred = vec![vec![1.0]];
        let mask = MaskSpec {
            masked: vec![false],
        };
        assert!(matches!(
            loss_base(&pred, &pred, &mask),
            Err(CoreError::Validation(_))
        ));
    }

    #[test]
    fn base_grad_matches_finite_differences() {
        let mut rng = substream(8, "base-grad", 0);
        let n = 3;
        let p = 4;
        let mut pred: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let target: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>()).collect())
            .collect();
        let mask = MaskSpec {
            masked: vec![true, true, false],
        };
        let (_, grad) = loss_base_grad(&pred, &target, &mask).unwrap();
        let eps = 1e-6;
        for t in 0..n {
            for k in 0..p {
                let orig = pred[t][k];
                pred[t][k] = orig + eps;
                let hi = loss_base(&pred, &target, &mask).unwrap();
                pred[t][k] = orig - eps;
                let lo = loss_base(&pred, &target, &mask).unwrap();
                pred[t][k] = orig;
                let fd = (hi - lo) / (2.0 * eps);
                assert!((fd - grad[t][k]).abs() < 1e-8, "entry ({t}, {k})");
            }
        }
    }

    #[test]
    fn align_loss_zero_on_match_and_unit_on_unit_bump() {
        let mut f3 = FeatureSeq::zeros(2, 3, 4);
        fill_random(&mut f3, 1);
        assert_eq!(loss_3d_align(&f3, &f3).unwrap(), 0.0);
        let mut f2 = f3.clone();
        // One unit vector at a single (block, frame): loss is 1 / (2 * 3).
        f2.at_mut(1, 2)[0] += 1.0;
        let loss = loss_3d_align(&f3, &f2).unwrap();
        assert!((loss - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn align_loss_matches_brute_force() {
        let mut f3 = FeatureSeq::zeros(3, 4, 5);
        let mut f2 = FeatureSeq::zeros(3, 4, 5);
        fill_random(&mut f3, 2);
        fill_random(&mut f2, 3);
        let loss = loss_3d_align(&f3, &f2).unwrap();
        let mut acc = 0.0;
        for b in 0..3 {
            for t in 0..4 {
                let mut sq = 0.0;
                for k in 0..5 {
                    let d = f2.at(b, t)[k] - f3.at(b, t)[k];
                    sq += d * d;
                }
                acc += sq.sqrt();
            }
        }
        assert!((loss - acc / 12.0).abs() < 1e-12);
    }

    #[test]
    fn align_grad_matches_finite_differences() {
        let mut f3 = FeatureSeq::zeros(2, 3, 4);
        let mut f2 = FeatureSeq::zeros(2, 3, 4);
        fill_random(&mut f3, 4);
        fill_random(&mut f2, 5);
        let (_, grad) = loss_3d_align_grad(&f3, &f2).unwrap();
        let eps = 1e-6;
        for i in 0..f2.data.len() {
            let orig = f2.data[i];
            f2.data[i] = orig + eps;
            let hi = loss_3d_align(&f3, &f2).unwrap();
            f2.data[i] = orig - eps;
            let lo = loss_3d_align(&f3, &f2).unwrap();
            f2.data[i] = orig;
            let fd = (hi - lo) / (2.0 * eps);
            assert!((fd - grad.data[i]).abs() < 1e-8, "coordinate {i}");
        }
    }

    #[test]
    fn ortho_loss_trivial_values() {
        let blocks = 2;
        let frames = 2;
        let width = 4;
        let mut g = FeatureSeq::zeros(blocks, frames, width);
        let mut l = FeatureSeq::zeros(blocks, frames, width);
        for b in 0..blocks {
            for t in 0..frames {
                g.at_mut(b, t)[0] = 1.0;
                l.at_mut(b, t)[1] = 1.0;
            }
        }
        assert_eq!(loss_ortho(&g, &l).unwrap(), 0.0);

        let mut l_same = g.clone();
        fill_random(&mut l_same, 6);
        assert!((loss_ortho(&l_same, &l_same).unwrap() - 1.0).abs() < 1e-12);

        let mut l_anti = l_same.clone();
        for v in &mut l_anti.data {
            *v = -*v;
        }
        assert!((loss_ortho(&l_same, &l_anti).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ortho_loss_zero_for_degenerate_norms() {
        let g = FeatureSeq::zeros(2, 2, 3);
        let mut l = FeatureSeq::zeros(2, 2, 3);
        fill_random(&mut l, 7);
        assert_eq!(loss_ortho(&g, &l).unwrap(), 0.0);
        let (loss, dg, dl) = loss_ortho_grad(&g, &l).unwrap();
        assert_eq!(loss, 0.0);
        assert!(dg.is_all_zero());
        assert!(dl.is_all_zero());
    }

    #[test]
    fn ortho_grad_matches_finite_differences() {
        let mut g = FeatureSeq::zeros(2, 3, 4);
        let mut l = FeatureSeq::zeros(2, 3, 4);
        fill_random(&mut g, 8);
        fill_random(&mut l, 9);
        let (_, dg, dl) = loss_ortho_grad(&g, &l).unwrap();
        let eps = 1e-6;
        for i in 0..g.data.len() {
            let orig = g.data[i];
            g.data[i] = orig + eps;
            let hi = loss_ortho(&g, &l).unwrap();
            g.data[i] = orig - eps;
            let lo = loss_ortho(&g, &l).unwrap();
            g.data[i] = orig;
            let fd = (hi - lo) / (2.0 * eps);
            assert!((fd - dg.data[i]).abs() < 1e-8, "g coordinate {i}");
        }
        for i in 0..l.data.len() {
            let orig = l.data[i];
            l.data[i] = orig + eps;
            let hi = loss_ortho(&g, &l).unwrap();
            l.data[i] = orig - eps;
            let lo = loss_ortho(&g, &l).unwrap();
            l.data[i] = orig;
            let fd = (hi - lo) / (2.0 * eps);
            assert!((fd - dl.data[i]).abs() < 1e-8, "l coordinate {i}");
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = FeatureSeq::zeros(2, 3, 4);
        let b = FeatureSeq::zeros(2, 3, 5);
        assert!(matches!(
            loss_3d_align(&a, &b),
            Err(CoreError::ShapeMismatch(_))
        ));
        assert!(matches!(loss_ortho(&a, &b), Err(CoreError::ShapeMismatch(_))));
    }
}
