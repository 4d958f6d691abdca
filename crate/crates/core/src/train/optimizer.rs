//! First/second-moment adaptive gradient descent over tensor lists.
//!
//! The optimizer walks the canonical tensor order of the parameter
//! structs; moments are kept per tensor in the same order, so state and
//! parameters stay aligned as long as shapes do not change mid-run.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-tensor first and second moments plus the shared step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh zero moments shaped like the given tensor list.
    pub fn for_shapes(tensors: &[(&'static str, &[f64])]) -> Self {
        AdamState {
            t: 0,
            m: tensors.iter().map(|(_, t)| vec![0.0; t.len()]).collect(),
            v: tensors.iter().map(|(_, t)| vec![0.0; t.len()]).collect(),
        }
    }

    /// One update: `p -= lr_hat * m_hat / (sqrt(v_hat) + eps)` per entry.
    /// `params` and `grads` must follow the same canonical tensor order
    /// this state was built from.
    pub fn step(
        &mut self,
        cfg: &AdamConfig,
        params: Vec<&mut Vec<f64>>,
        grads: &[(&'static str, &[f64])],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "optimizer state holds {} tensors, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for ((p, (_, g)), (m, v)) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(CoreError::ShapeMismatch(format!(
                    "tensor length drifted: param {}, grad {}, state {}",
                    p.len(),
                    g.len(),
                    m.len()
                )));
            }
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_learning_rate_leaves_params_bitwise() {
        let mut p1 = vec![1.5, -2.25, 0.125];
        let mut p2 = vec![0.75];
        let snapshot = (p1.clone(), p2.clone());
        let grads_data = (vec![0.3, 0.1, -0.4], vec![1.0]);
        let grads: Vec<(&'static str, &[f64])> =
            vec![("a", &grads_data.0), ("b", &grads_data.1)];
        let mut state = AdamState::for_shapes(&[("a", &p1), ("b", &p2)]);
        let cfg = AdamConfig::with_lr(0.0);
        state.step(&cfg, vec![&mut p1, &mut p2], &grads).unwrap();
        assert_eq!(p1, snapshot.0);
        assert_eq!(p2, snapshot.1);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_against_gradient_sign() {
        // With bias correction the first update is lr * g / (|g| + eps).
        let mut p = vec![1.0, 1.0];
        let g_data = vec![0.5, -0.25];
        let grads: Vec<(&'static str, &[f64])> = vec![("w", &g_data)];
        let mut state = AdamState::for_shapes(&[("w", &p)]);
        let cfg = AdamConfig::with_lr(0.01);
        state.step(&cfg, vec![&mut p], &grads).unwrap();
        assert!((p[0] - (1.0 - 0.01)).abs() < 1e-6);
        assert!((p[1] - (1.0 + 0.01)).abs() < 1e-6);
    }

    #[test]
    fn converges_on_a_quadratic() {
        // Minimize (x - 3)^2; gradient 2(x - 3).
        let mut p = vec![0.0];
        let cfg = AdamConfig::with_lr(0.05);
        let mut state = AdamState::for_shapes(&[("x", &p)]);
        for _ in 0..2000 {
            let g_data = vec![2.0 * (p[0] - 3.0)];
            let grads: Vec<(&'static str, &[f64])> = vec![("x", &g_data)];
            state.step(&cfg, vec![&mut p], &grads).unwrap();
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "ended at {}", p[0]);
    }

    #[test]
    fn tensor_count_mismatch_is_rejected() {
        let mut p = vec![0.0];
        let g_data = vec![1.0];
        let grads: Vec<(&'static str, &[f64])> = vec![("a", &g_data), ("b", &g_data)];
        let mut state = AdamState::for_shapes(&[("a", &p)]);
        let cfg = AdamConfig::with_lr(0.1);
        assert!(state.step(&cfg, vec![&mut p], &grads).is_err());
    }
}
