//! Adam with bias correction; the unconstrained baseline.

use crate::error::{Error, Result};
use crate::net::{GradientVector, ParameterVector};

/// Full Adam state. Defaults are the canonical published values.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub x: ParameterVector,
    m1: Vec<f64>,
    m2: Vec<f64>,
    k: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl AdamState {
    pub fn new(x0: ParameterVector) -> Self {
        let n = x0.len();
        AdamState {
            x: x0,
            m1: vec![0.0; n],
            m2: vec![0.0; n],
            k: 0,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn step(&mut self, grad: &GradientVector) -> Result<()> {
        if grad.len() != self.x.len() {
            return Err(Error::dim("adam gradient", self.x.len(), grad.len()));
        }
        self.k += 1;
        let bc1 = 1.0 - self.beta1.powi(self.k as i32);
        let bc2 = 1.0 - self.beta2.powi(self.k as i32);
        for i in 0..self.x.len() {
            let g = grad[i];
            self.m1[i] = self.beta1 * self.m1[i] + (1.0 - self.beta1) * g;
            self.m2[i] = self.beta2 * self.m2[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m1[i] / bc1;
            let v_hat = self.m2[i] / bc2;
            self.x[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps_hat);
        }
        Ok(())
    }
}
