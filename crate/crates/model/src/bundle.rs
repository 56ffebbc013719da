use std::path::Path;

use pcgen_core::{LabeledPointCloud, PartVocabulary};
use pcgen_nn::{decode_checkpoint, encode_checkpoint, load_params, prefixed, prefixed_mut, Parameterized, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{Diffusion, DiffusionConfig};
use crate::error::{ModelError, Result};
use crate::train::cloud_inputs;
use crate::util::stream_rng;
use crate::vae::{Vae, VaeConfig};

const META_TENSOR: &str = "meta.json";
const FORMAT: &str = "pcgen-latent-model";

/// A trained VAE, optionally with its diffusion stage, plus the part
/// vocabulary it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentModel {
    pub vocab: PartVocabulary,
    pub vae: Vae,
    pub diffusion: Option<Diffusion>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    format: String,
    parts: Vec<String>,
    vae: VaeConfig,
    diffusion: Option<DiffusionConfig>,
}

impl LatentModel {
    pub fn new(vocab: PartVocabulary, vae: Vae) -> Result<Self> {
        if vocab.len() != vae.config.parts {
            return Err(ModelError::Config(format!(
                "vocabulary of {} parts for a VAE with {}",
                vocab.len(),
                vae.config.parts
            )));
        }
        Ok(Self { vocab, vae, diffusion: None })
    }

    pub fn with_diffusion(mut self, diffusion: Diffusion) -> Result<Self> {
        if !diffusion.fits(&self.vae.config) {
            return Err(ModelError::Config("denoiser widths do not match the VAE".into()));
        }
        self.diffusion = Some(diffusion);
        Ok(self)
    }

    pub fn diffusion(&self) -> Result<&Diffusion> {
        self.diffusion.as_ref().ok_or_else(|| ModelError::Checkpoint("checkpoint has no diffusion stage".into()))
    }

    /// Posterior-mean encoding decoded with the true labels.
    pub fn reconstruct(&self, cloud: &LabeledPointCloud) -> Result<LabeledPointCloud> {
        self.check_cloud(cloud)?;
        let (x, y) = cloud_inputs(cloud, true)?;
        let (z0, h0) = self.vae.encode_means(&x, &y)?;
        let out = self.vae.decode_points(&h0, &y, &z0)?;
        Ok(LabeledPointCloud::new(out.into_data(), cloud.dim(), cloud.labels().to_vec(), cloud.parts())?)
    }

    pub(crate) fn check_cloud(&self, cloud: &LabeledPointCloud) -> Result<()> {
        if cloud.dim() != self.vae.config.dim || cloud.parts() != self.vae.config.parts {
            return Err(ModelError::Shape(format!(
                "cloud of dimension {} with {} parts does not fit a model of dimension {} with {} parts",
                cloud.dim(),
                cloud.parts(),
                self.vae.config.dim,
                self.vae.config.parts
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            format: FORMAT.into(),
            parts: self.vocab.names().to_vec(),
            vae: self.vae.config,
            diffusion: self.diffusion.as_ref().map(|d| d.config),
        };
        let json = serde_json::to_vec(&meta).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let meta_t = Tensor::vector(json.into_iter().map(f64::from).collect());
        let params = self.params();
        let tensors = std::iter::once((META_TENSOR, &meta_t)).chain(params.iter().map(|(n, t)| (n.as_str(), *t)));
        Ok(encode_checkpoint(tensors))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let tensors = decode_checkpoint(bytes)?;
        let Some((_, meta_t)) = tensors.iter().find(|(n, _)| n == META_TENSOR) else {
            return Err(ModelError::Checkpoint("missing model metadata".into()));
        };
        let json: Vec<u8> = meta_t
            .data()
            .iter()
            .map(|&v| u8::try_from(v as i64).ok().filter(|&b| f64::from(b) == v))
            .collect::<Option<_>>()
            .ok_or_else(|| ModelError::Checkpoint("corrupt model metadata".into()))?;
        let meta: Meta = serde_json::from_slice(&json).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if meta.format != FORMAT {
            return Err(ModelError::Checkpoint(format!("unknown model format {:?}", meta.format)));
        }
        let vocab = PartVocabulary::new(meta.parts)?;
        // Shapes come from the configs; every value is then overwritten.
        let mut rng = stream_rng(0, 0);
        let mut model = Self::new(vocab, Vae::new(meta.vae, &mut rng)?)?;
        if let Some(cfg) = meta.diffusion {
            model.diffusion = Some(Diffusion::new(&model.vae.config, cfg, &mut rng)?);
        }
        load_params(&mut model, &tensors)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }
}

impl Parameterized for LatentModel {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<_> = prefixed("vae", self.vae.params()).collect();
        if let Some(d) = &self.diffusion {
            out.extend(prefixed("diffusion", d.params()));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<_> = prefixed_mut("vae", self.vae.params_mut()).collect();
        if let Some(d) = &mut self.diffusion {
            out.extend(prefixed_mut("diffusion", d.params_mut()));
        }
        out
    }
}
