use pcgen_nn::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl ScheduleConfig {
    /// The classic 1000-step range `1e-4..0.02` scaled by `1000 / steps`,
    /// so `alpha_bar(T)` stays near zero for short schedules. The scale is
    /// capped at 25, keeping `beta_end <= 0.5`.
    pub fn scaled(steps: usize) -> Self {
        let k = (1000.0 / steps.max(1) as f64).min(25.0);
        Self { steps, beta_start: 1e-4 * k, beta_end: 0.02 * k }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self::scaled(200)
    }
}

/// Linear-β DDPM schedule. Index `t` runs over `1..=T`; `alpha_bar(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    config: ScheduleConfig,
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(config: ScheduleConfig) -> Result<Self> {
        let ScheduleConfig { steps, beta_start, beta_end } = config;
        if steps < 2 || !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
            return Err(ModelError::Config(format!(
                "schedule needs T >= 2 and 0 < beta_start < beta_end < 1, got {config:?}"
            )));
        }
        let mut betas = vec![0.0];
        let mut alpha_bars = vec![1.0];
        for t in 1..=steps {
            let beta = beta_start + (beta_end - beta_start) * (t - 1) as f64 / (steps - 1) as f64;
            betas.push(beta);
            alpha_bars.push(alpha_bars[t - 1] * (1.0 - beta));
        }
        Ok(Self { config, betas, alpha_bars })
    }

    pub fn config(&self) -> ScheduleConfig {
        self.config
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.betas[t]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    /// Variance of `q(x_{t-1} | x_t, x_0)`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.betas[t] * (1.0 - self.alpha_bars[t - 1]) / (1.0 - self.alpha_bars[t])
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(ModelError::StepOutOfRange { t, steps: self.steps() });
        }
        Ok(())
    }

    /// `sqrt(ab_t) x0 + sqrt(1 - ab_t) eps`.
    pub fn q_sample(&self, x0: &Tensor, t: usize, eps: &Tensor) -> Result<Tensor> {
        self.check(t)?;
        if x0.shape() != eps.shape() {
            return Err(ModelError::Shape(format!("q_sample {:?} vs noise {:?}", x0.shape(), eps.shape())));
        }
        let (a, b) = (self.alpha_bars[t].sqrt(), (1.0 - self.alpha_bars[t]).sqrt());
        let data = x0.data().iter().zip(eps.data()).map(|(x, e)| a * x + b * e).collect();
        Ok(Tensor::new(x0.shape().to_vec(), data)?)
    }

    /// One ancestral step from `x_t` given predicted noise and fresh noise `z`
    /// (ignored at `t = 1`).
    pub fn reverse_step(&self, x_t: &Tensor, t: usize, eps_hat: &Tensor, z: &Tensor) -> Result<Tensor> {
        self.check(t)?;
        let beta = self.betas[t];
        let coef = beta / (1.0 - self.alpha_bars[t]).sqrt();
        let inv = 1.0 / (1.0 - beta).sqrt();
        let sigma = if t > 1 { self.posterior_variance(t).sqrt() } else { 0.0 };
        let data = x_t
            .data()
            .iter()
            .zip(eps_hat.data())
            .zip(z.data())
            .map(|((x, e), n)| inv * (x - coef * e) + sigma * n)
            .collect();
        Ok(Tensor::new(x_t.shape().to_vec(), data)?)
    }

    /// Uniform draw from `1..=T`.
    pub fn sample_t(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(1..=self.steps())
    }
}
