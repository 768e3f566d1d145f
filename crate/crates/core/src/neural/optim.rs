use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    /// Adam variant with an infinity-norm second moment.
    Adamax,
}

/// Optimizer hyperparameters plus per-parameter moment accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            kind,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step_count: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Adam with β = (0.9, 0.999), ε = 1e-8.
    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, 0.9, 0.999, 1e-8)
    }

    /// AdaMax with β = (0.9, 0.999), ε = 1e-8.
    pub fn adamax(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adamax, learning_rate, 0.9, 0.999, 1e-8)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                got: grads.len(),
            });
        }
        if self.first.is_empty() {
            self.first = vec![0.0; params.len()];
            self.second = vec![0.0; params.len()];
        } else if self.first.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first.len(),
                got: params.len(),
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let bias1 = 1.0 - b1.powi(t);
        match self.kind {
            OptimizerKind::Adam => {
                let bias2 = 1.0 - b2.powi(t);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = b1 * self.first[i] + (1.0 - b1) * g;
                    self.second[i] = b2 * self.second[i] + (1.0 - b2) * g * g;
                    let m_hat = self.first[i] / bias1;
                    let v_hat = self.second[i] / bias2;
                    params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::Adamax => {
                let lr = self.learning_rate / bias1;
                for i in 0..params.len() {
                    let g = grads[i];
                    self.first[i] = b1 * self.first[i] + (1.0 - b1) * g;
                    self.second[i] = (b2 * self.second[i]).max(g.abs() + eps);
                    params[i] -= lr * self.first[i] / self.second[i];
                }
            }
        }
        Ok(())
    }
}
