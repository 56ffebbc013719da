use pcgen_core::{LabeledPointCloud, PointCloudSet};
use pcgen_nn::Tensor;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::LatentModel;
use crate::denoiser::{GlobalDenoiser, PointDenoiser};
use crate::error::{ModelError, Result};
use crate::schedule::NoiseSchedule;
use crate::util::{argmax_rows, normal_tensor, one_hot, softmax_rows, stream_rng};

/// Smoothing factor applied to the newest label prediction.
pub const DEFAULT_EMA_ALPHA: f64 = 0.1;

/// Running label probabilities, `probs <- alpha * new + (1 - alpha) * probs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaLabelState {
    alpha: f64,
    probs: Tensor,
}

impl EmaLabelState {
    pub fn new(alpha: f64, init: Tensor) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ModelError::Config(format!("EMA factor {alpha} outside [0, 1]")));
        }
        Ok(Self { alpha, probs: init })
    }

    pub fn uniform(alpha: f64, n: usize, parts: usize) -> Result<Self> {
        Self::new(alpha, Tensor::new(vec![n, parts], vec![1.0 / parts as f64; n * parts])?)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn update(&mut self, newest: &Tensor) -> Result<()> {
        if newest.shape() != self.probs.shape() {
            return Err(ModelError::Shape(format!(
                "EMA state {:?} cannot absorb {:?}",
                self.probs.shape(),
                newest.shape()
            )));
        }
        let a = self.alpha;
        for (p, &v) in self.probs.data_mut().iter_mut().zip(newest.data()) {
            *p = a * v + (1.0 - a) * *p;
        }
        Ok(())
    }

    /// Argmax labels, lowest part on ties.
    pub fn labels(&self) -> Vec<u16> {
        argmax_rows(&self.probs)
    }

    pub(crate) fn probs_mut(&mut self) -> &mut Tensor {
        &mut self.probs
    }

    pub fn into_probs(self) -> Tensor {
        self.probs
    }
}

/// A noise predictor over rows of global latents sharing one step.
pub trait GlobalEps {
    fn width(&self) -> usize;
    fn predict_eps(&self, z_t: &Tensor, t: usize) -> Result<Tensor>;
}

impl GlobalEps for GlobalDenoiser {
    fn width(&self) -> usize {
        self.config.d_z
    }

    fn predict_eps(&self, z_t: &Tensor, t: usize) -> Result<Tensor> {
        self.predict(z_t, &vec![t; z_t.rows()])
    }
}

fn step_noise(rng: &mut impl Rng, t: usize, shape: &[usize]) -> Tensor {
    if t > 1 {
        normal_tensor(rng, shape)
    } else {
        Tensor::zeros(shape)
    }
}

/// Ancestral sampling of `rows` independent global latents.
pub fn sample_global_rows<G: GlobalEps>(
    model: &G,
    schedule: &NoiseSchedule,
    rows: usize,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    let shape = [rows, model.width()];
    let mut z = normal_tensor(rng, &shape);
    for t in (1..=schedule.steps()).rev() {
        let eps = model.predict_eps(&z, t)?;
        z = schedule.reverse_step(&z, t, &eps, &step_noise(rng, t, &shape))?;
    }
    Ok(z)
}

pub fn sample_global<G: GlobalEps>(model: &G, schedule: &NoiseSchedule, rng: &mut impl Rng) -> Result<Vec<f64>> {
    Ok(sample_global_rows(model, schedule, 1, rng)?.into_data())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSample {
    /// Normalized latent points.
    pub h0: Tensor,
    pub labels: Vec<u16>,
    /// Smoothed label probabilities after the last step.
    pub probs: Tensor,
    /// Softmaxed per-step predictions from `t = T` down to `t = 1`, when
    /// logging was requested.
    pub steps: Vec<Tensor>,
}

/// Ancestral sampling of `n` latent points with EMA-smoothed labels,
/// starting from uniform label probabilities. `cond` is the normalized
/// global latent.
pub fn sample_points(
    model: &PointDenoiser,
    schedule: &NoiseSchedule,
    cond: &[f64],
    n: usize,
    alpha: f64,
    log_steps: bool,
    rng: &mut impl Rng,
) -> Result<PointSample> {
    if n == 0 {
        return Err(ModelError::Shape("cannot sample an empty cloud".into()));
    }
    let shape = [n, model.config.d_h];
    let mut ema = EmaLabelState::uniform(alpha, n, model.config.parts)?;
    let mut steps = Vec::new();
    let mut h = normal_tensor(rng, &shape);
    for t in (1..=schedule.steps()).rev() {
        let (eps, logits) = model.predict(&h, t, cond)?;
        let probs = softmax_rows(&logits);
        ema.update(&probs)?;
        if log_steps {
            steps.push(probs);
        }
        h = schedule.reverse_step(&h, t, &eps, &step_noise(rng, t, &shape))?;
    }
    Ok(PointSample { h0: h, labels: ema.labels(), probs: ema.into_probs(), steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleOptions {
    pub ema_alpha: f64,
    /// Condition the decoder on smoothed probabilities instead of one-hot
    /// argmax labels.
    pub soft_labels: bool,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self { ema_alpha: DEFAULT_EMA_ALPHA, soft_labels: false }
    }
}

/// One generated cloud from its own seeded stream.
pub fn generate_one(model: &LatentModel, n: usize, seed: u64, index: u64, opts: SampleOptions) -> Result<LabeledPointCloud> {
    let diff = model.diffusion()?;
    let mut rng = stream_rng(seed, index);
    let u = sample_global(&diff.global, &diff.schedule, &mut rng)?;
    let s = sample_points(&diff.point, &diff.schedule, &u, n, opts.ema_alpha, false, &mut rng)?;
    let z0 = diff.z_norm.denormalize(&u);
    let h0 = diff.h_norm.denormalize_rows(&s.h0);
    let parts = model.vae.config.parts;
    let y = if opts.soft_labels { s.probs } else { one_hot(&s.labels, parts) };
    let x = model.vae.decode_points(&h0, &y, &z0)?;
    Ok(LabeledPointCloud::new(x.into_data(), model.vae.config.dim, s.labels, parts)?)
}

/// `count` clouds of `n` points; sample `i` uses stream `i` of `seed`, so the
/// result does not depend on the thread count.
pub fn generate(model: &LatentModel, n: usize, count: usize, seed: u64, opts: SampleOptions) -> Result<PointCloudSet> {
    model.diffusion()?;
    let clouds = (0..count as u64)
        .into_par_iter()
        .map(|i| generate_one(model, n, seed, i, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloudSet::new(format!("generated-s{seed}"), model.vocab.clone(), clouds)?)
}
