use pcgen_core::{LabeledPointCloud, PointCloudSet};
use pcgen_nn::{Adam, AdamConfig, Parameterized, Tensor};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diffusion::{Diffusion, LatentNorm};
use crate::error::{ModelError, Result};
use crate::util::{normal_tensor, one_hot, stream_rng};
use crate::vae::{Vae, VaeLossWeights, VaeNoise};

const TRAIN_STREAM: u64 = 0;
const LABEL_STREAM: u64 = 1;

/// Per-epoch means of each loss term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl LossCurve {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Values of `column` for every epoch.
    pub fn column(&self, column: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == column)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// `epoch,<columns>` header and one row per epoch, epochs from 1.
    pub fn to_csv(&self) -> String {
        let mut out = format!("epoch,{}\n", self.columns.join(","));
        for (e, row) in self.rows.iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("{},{}\n", e + 1, vals.join(",")));
        }
        out
    }
}

/// Which clouds keep their labels.
///
/// Without semi-supervision every cloud is labeled. Otherwise
/// `round(fraction * n)` clouds are chosen by a shuffle on a stream separate
/// from training, so a fraction of 1.0 leaves the training trajectory intact.
pub fn labeled_mask(n: usize, semi_supervised: bool, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !semi_supervised {
        return Ok(vec![true; n]);
    }
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ModelError::Config(format!("labeled fraction {fraction} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, LABEL_STREAM));
    let mut mask = vec![false; n];
    for &i in &order[..(fraction * n as f64).round() as usize] {
        mask[i] = true;
    }
    Ok(mask)
}

/// Coordinates and label conditioning of one cloud; zeros stand in for the
/// one-hot labels of unlabeled clouds.
pub fn cloud_inputs(cloud: &LabeledPointCloud, labeled: bool) -> Result<(Tensor, Tensor)> {
    let x = Tensor::matrix(cloud.len(), cloud.dim(), cloud.points().to_vec())?;
    let y = if labeled { one_hot(cloud.labels(), cloud.parts()) } else { Tensor::zeros(&[cloud.len(), cloud.parts()]) };
    Ok((x, y))
}

fn scale_grads<M: Parameterized>(m: &mut M, s: f64) {
    for (_, t) in m.params_mut() {
        t.data_mut().iter_mut().for_each(|v| *v *= s);
    }
}

fn check_set(set: &PointCloudSet, dim: usize, parts: usize) -> Result<()> {
    if set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if set.vocab().len() != parts || set.iter().any(|c| c.dim() != dim) {
        return Err(ModelError::Shape(format!("training set does not match a model of dimension {dim} with {parts} parts")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub weights: VaeLossWeights,
    pub seed: u64,
    pub semi_supervised: bool,
    pub labeled_fraction: f64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            lr: 2e-3,
            batch: 8,
            weights: VaeLossWeights::default(),
            seed: 0,
            semi_supervised: false,
            labeled_fraction: 1.0,
        }
    }
}

/// Minibatch Adam on the negated ELBO, one posterior sample per cloud.
pub fn train_vae(vae: &mut Vae, set: &PointCloudSet, cfg: &VaeTrainConfig) -> Result<LossCurve> {
    check_set(set, vae.config.dim, vae.config.parts)?;
    if cfg.epochs == 0 || cfg.batch == 0 {
        return Err(ModelError::Config("epochs and batch must be positive".into()));
    }
    let mask = labeled_mask(set.len(), cfg.semi_supervised, cfg.labeled_fraction, cfg.seed)?;
    let inputs: Vec<(Tensor, Tensor)> =
        set.iter().zip(&mask).map(|(c, &l)| cloud_inputs(c, l)).collect::<Result<_>>()?;
    let mut rng = stream_rng(cfg.seed, TRAIN_STREAM);
    let mut adam = Adam::new(vae, AdamConfig { lr: cfg.lr, ..Default::default() });
    let mut grads = vae.zeros_like();
    let mut curve = LossCurve::new(&["total", "rec", "kl_z", "kl_h"]);
    let mut order: Vec<usize> = (0..set.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0; 4];
        for batch in order.chunks(cfg.batch) {
            grads.zero();
            for &i in batch {
                let (x, y) = &inputs[i];
                let noise = VaeNoise::sample(&mut rng, x.rows(), &vae.config);
                let t = vae.elbo_loss(x, y, &noise, cfg.weights, &mut grads)?;
                for (s, v) in sums.iter_mut().zip([t.total, t.rec, t.kl_z, t.kl_h]) {
                    *s += v;
                }
            }
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            adam.step(vae, &grads)?;
        }
        curve.rows.push(sums.iter().map(|s| s / set.len() as f64).collect());
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// Cosine decay of the learning rate towards zero over the run.
    pub lr_decay: bool,
    pub lambda_seg: f64,
    pub seed: u64,
    pub semi_supervised: bool,
    pub labeled_fraction: f64,
}

impl Default for DiffusionTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            lr: 2e-3,
            batch: 2,
            lr_decay: true,
            lambda_seg: 1.0,
            seed: 0,
            semi_supervised: false,
            labeled_fraction: 1.0,
        }
    }
}

/// Latents of a set under a frozen VAE: posterior means, labels where kept.
pub struct EncodedSet {
    pub z0: Vec<Vec<f64>>,
    pub h0: Vec<Tensor>,
    pub labels: Vec<Option<Vec<u16>>>,
}

pub fn encode_set(vae: &Vae, set: &PointCloudSet, mask: &[bool]) -> Result<EncodedSet> {
    let mut out = EncodedSet { z0: Vec::new(), h0: Vec::new(), labels: Vec::new() };
    for (cloud, &labeled) in set.iter().zip(mask) {
        let (x, y) = cloud_inputs(cloud, labeled)?;
        let (z0, h0) = vae.encode_means(&x, &y)?;
        out.z0.push(z0);
        out.h0.push(h0);
        out.labels.push(labeled.then(|| cloud.labels().to_vec()));
    }
    Ok(out)
}

fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    0.5 * base * (1.0 + (std::f64::consts::PI * step as f64 / total as f64).cos())
}

/// Trains both denoisers on posterior-mean latents of `set` and fits the
/// global-latent normalization. The point denoiser is conditioned on the
/// normalized global latent.
///
/// Each cloud contributes one point-loss term and one global-loss term per
/// epoch at independently drawn steps. The curve records the global noise
/// loss, the point noise loss and the cross-entropy averaged over labeled
/// clouds.
pub fn train_diffusion(vae: &Vae, diffusion: &mut Diffusion, set: &PointCloudSet, cfg: &DiffusionTrainConfig) -> Result<LossCurve> {
    check_set(set, vae.config.dim, vae.config.parts)?;
    if cfg.epochs == 0 || cfg.batch == 0 {
        return Err(ModelError::Config("epochs and batch must be positive".into()));
    }
    if !diffusion.fits(&vae.config) {
        return Err(ModelError::Config("denoiser widths do not match the VAE".into()));
    }
    let mask = labeled_mask(set.len(), cfg.semi_supervised, cfg.labeled_fraction, cfg.seed)?;
    let data = encode_set(vae, set, &mask)?;
    let labeled = mask.iter().filter(|&&l| l).count();
    diffusion.z_norm = LatentNorm::fit(&data.z0)?;
    diffusion.h_norm = LatentNorm::fit_shared(&data.h0)?;
    let h_unit: Vec<Tensor> = data.h0.iter().map(|h| diffusion.h_norm.normalize_rows(h)).collect();
    let z_unit: Vec<Tensor> = data
        .z0
        .iter()
        .map(|z| Tensor::matrix(1, z.len(), diffusion.z_norm.normalize(z)))
        .collect::<std::result::Result<_, _>>()?;

    let Diffusion { schedule, point, global, .. } = diffusion;
    let mut rng = stream_rng(cfg.seed, TRAIN_STREAM);
    let adam_cfg = AdamConfig { lr: cfg.lr, ..Default::default() };
    let mut point_adam = Adam::new(point, adam_cfg);
    let mut global_adam = Adam::new(global, adam_cfg);
    let mut point_grads = point.zeros_like();
    let mut global_grads = global.zeros_like();
    let mut curve = LossCurve::new(&["global", "noise", "ce"]);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let total_steps = cfg.epochs * set.len().div_ceil(cfg.batch);
    let mut step = 0;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut g_sum, mut n_sum, mut ce_sum) = (0.0, 0.0, 0.0);
        for batch in order.chunks(cfg.batch) {
            point_grads.zero();
            global_grads.zero();
            for &i in batch {
                let h0 = &h_unit[i];
                let t = schedule.sample_t(&mut rng);
                let eps = normal_tensor(&mut rng, h0.shape());
                let h_t = schedule.q_sample(h0, t, &eps)?;
                let terms = point.loss(
                    &h_t,
                    t,
                    z_unit[i].data(),
                    &eps,
                    data.labels[i].as_deref(),
                    cfg.lambda_seg,
                    Some(&mut point_grads),
                )?;
                n_sum += terms.noise;
                ce_sum += terms.ce.unwrap_or(0.0);

                let tz = schedule.sample_t(&mut rng);
                let ez = normal_tensor(&mut rng, z_unit[i].shape());
                let z_t = schedule.q_sample(&z_unit[i], tz, &ez)?;
                g_sum += global.loss(&z_t, &[tz], &ez, Some(&mut global_grads))?;
            }
            let s = 1.0 / batch.len() as f64;
            scale_grads(&mut point_grads, s);
            scale_grads(&mut global_grads, s);
            if cfg.lr_decay {
                let lr = cosine_lr(cfg.lr, step, total_steps);
                point_adam.config.lr = lr;
                global_adam.config.lr = lr;
            }
            point_adam.step(point, &point_grads)?;
            global_adam.step(global, &global_grads)?;
            step += 1;
        }
        let n = set.len() as f64;
        let ce = if labeled > 0 { ce_sum / labeled as f64 } else { f64::NAN };
        curve.rows.push(vec![g_sum / n, n_sum / n, ce]);
    }
    Ok(curve)
}
