use crate::error::{NnError, Result};
use crate::params::Parameterized;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam with moment buffers mirroring the parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new<M: Parameterized + ?Sized>(model: &M, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = model.params().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Self { config, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M, grads: &M) -> Result<()> {
        let grads = grads.params();
        let mut params = model.params_mut();
        if grads.len() != params.len() || params.len() != self.m.len() {
            return Err(NnError::shape("Adam parameter list", &[self.m.len()], &[params.len(), grads.len()]));
        }
        for (((_, p), (name, g)), m) in params.iter().zip(&grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(NnError::shape(format!("Adam {name}"), p.shape(), g.shape()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((_, p), (_, g)), (m, v)) in params.iter_mut().zip(&grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let (pd, gd) = (p.data_mut(), g.data());
            for i in 0..pd.len() {
                let gi = gd[i];
                let mi = &mut m.data_mut()[i];
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                let m_hat = *mi / c1;
                let vi = &mut v.data_mut()[i];
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let v_hat = *vi / c2;
                pd[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
