use anyhow::{Context, Result};
use pcgen_core::PointCloudSet;
use pcgen_model::{
    stream_rng, train_diffusion, train_vae, Diffusion, DiffusionConfig, DiffusionTrainConfig, LatentModel, LossCurve,
    ModelError, Vae, VaeConfig, VaeTrainConfig,
};
use serde::{Deserialize, Serialize};

const VAE_INIT_STREAM: u64 = 2;
const DIFFUSION_INIT_STREAM: u64 = 3;

/// Stage-one settings: latent widths plus the training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeStage {
    pub d_z: usize,
    pub d_h: usize,
    pub hidden: usize,
    pub train: VaeTrainConfig,
}

impl Default for VaeStage {
    fn default() -> Self {
        let v = VaeConfig::new(2, 1);
        Self { d_z: v.d_z, d_h: v.d_h, hidden: v.hidden, train: VaeTrainConfig::default() }
    }
}

/// Stage-two settings: denoiser shapes plus the training schedule.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionStage {
    pub model: DiffusionConfig,
    pub train: DiffusionTrainConfig,
}

/// Initializes a VAE for the set's dimension and vocabulary and trains it.
/// Initialization draws from its own stream of the training seed.
pub fn train_vae_stage(set: &PointCloudSet, stage: &VaeStage) -> Result<(LatentModel, LossCurve)> {
    let first = set.get(0).ok_or(ModelError::EmptyDataset)?;
    let config = VaeConfig { dim: first.dim(), parts: set.vocab().len(), d_z: stage.d_z, d_h: stage.d_h, hidden: stage.hidden };
    let mut vae = Vae::new(config, &mut stream_rng(stage.train.seed, VAE_INIT_STREAM))?;
    let curve = train_vae(&mut vae, set, &stage.train).context("training the VAE")?;
    Ok((LatentModel::new(set.vocab().clone(), vae)?, curve))
}

/// Trains fresh denoisers on top of the VAE of `model`, replacing any
/// existing diffusion stage.
pub fn train_diffusion_stage(model: LatentModel, set: &PointCloudSet, stage: &DiffusionStage) -> Result<(LatentModel, LossCurve)> {
    let mut diffusion = Diffusion::new(&model.vae.config, stage.model, &mut stream_rng(stage.train.seed, DIFFUSION_INIT_STREAM))?;
    let curve = train_diffusion(&model.vae, &mut diffusion, set, &stage.train).context("training the denoisers")?;
    Ok((model.with_diffusion(diffusion)?, curve))
}
