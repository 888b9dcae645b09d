//! Adaptive-moment stochastic gradient optimizer.

use serde::{Deserialize, Serialize};

use super::mlp::{block_name, Mlp, MlpGrads};
use super::NumericError;

/// Whether a step moves parameters along (`Ascend`) or against (`Descend`) the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

/// Adam state for one network. Moment buffers are created lazily on the first
/// step and mirror the network's parameter blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `net`. Fails without touching anything if a
    /// gradient entry is not finite or the gradient shapes do not match.
    pub fn step(
        &mut self,
        net: &mut Mlp,
        grads: &MlpGrads,
        direction: Direction,
    ) -> Result<(), NumericError> {
        let grad_blocks = grads.blocks();
        let param_lens: Vec<usize> = net.param_blocks().iter().map(|b| b.len()).collect();
        if grad_blocks.len() != param_lens.len()
            || grad_blocks
                .iter()
                .zip(&param_lens)
                .any(|(g, &n)| g.len() != n)
        {
            return Err(NumericError::DimensionMismatch {
                op: "Adam::step",
                expected: format!(
                    "{} parameter blocks of sizes {param_lens:?}",
                    param_lens.len()
                ),
                got: format!(
                    "{:?}",
                    grad_blocks.iter().map(|g| g.len()).collect::<Vec<_>>()
                ),
            });
        }
        if let Some(bad) = grad_blocks
            .iter()
            .position(|g| g.iter().any(|v| !v.is_finite()))
        {
            return Err(NumericError::NonFinite {
                block: block_name(bad),
            });
        }
        if self.first.is_empty() {
            self.first = param_lens.iter().map(|&n| vec![0.0; n]).collect();
            self.second = self.first.clone();
        }
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - self.beta1.powf(t);
        let bias2 = 1.0 - self.beta2.powf(t);
        let sign = match direction {
            Direction::Ascend => -1.0,
            Direction::Descend => 1.0,
        };
        for (((params, g), m), v) in net
            .param_blocks_mut()
            .into_iter()
            .zip(grad_blocks)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..params.len() {
                // ascent on f is descent on −f
                let gi = sign * g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
