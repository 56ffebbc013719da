use pcgen_core::LabeledPointCloud;
use pcgen_nn::Tensor;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::LatentModel;
use crate::error::{ModelError, Result};
use crate::sampler::{EmaLabelState, DEFAULT_EMA_ALPHA};
use crate::train::cloud_inputs;
use crate::util::{argmax_rows, normal_tensor, one_hot, softmax_rows, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    /// Part whose latent points are kept.
    pub frozen_part: u16,
    /// Re-noise depth, `0 <= tau < T`.
    pub tau: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub ema_alpha: f64,
}

fn default_alpha() -> f64 {
    DEFAULT_EMA_ALPHA
}

impl EditRequest {
    pub fn new(frozen_part: u16, tau: usize, seed: u64) -> Self {
        Self { frozen_part, tau, seed, ema_alpha: DEFAULT_EMA_ALPHA }
    }
}

/// Frozen rows after re-imposition at step `t` (the state `h_t`), in the
/// normalized latent space of the diffusion stage.
#[derive(Debug, Clone, PartialEq)]
pub struct EditStep {
    pub t: usize,
    /// Fresh forward noise for the frozen rows; `None` at `t = 0`.
    pub noise: Option<Tensor>,
    pub frozen_rows: Tensor,
    /// Unfrozen points replaced because they were predicted as the frozen part.
    pub substituted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EditOutput {
    pub cloud: LabeledPointCloud,
    /// Indices of the frozen points.
    pub frozen: Vec<usize>,
    pub steps: Vec<EditStep>,
}

fn gather(t: &Tensor, rows: &[usize]) -> Tensor {
    let mut data = Vec::with_capacity(rows.len() * t.cols());
    for &i in rows {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(vec![rows.len(), t.cols()], data).unwrap()
}

fn scatter(t: &mut Tensor, rows: &[usize], src: &Tensor) {
    for (k, &i) in rows.iter().enumerate() {
        t.row_mut(i).copy_from_slice(src.row(k));
    }
}

/// Diffuse-denoise editing that keeps one part fixed.
///
/// Latents are posterior means. All latents are perturbed to `tau`; each
/// reverse step then denoises, smooths labels, replaces unfrozen points
/// predicted as the frozen part with randomly chosen unfrozen points of
/// other parts, and re-imposes the frozen rows as a fresh forward
/// perturbation of the original latents to the new step, with their
/// original labels.
pub fn edit(model: &LatentModel, cloud: &LabeledPointCloud, req: &EditRequest) -> Result<EditOutput> {
    model.check_cloud(cloud)?;
    let p = req.frozen_part;
    if !cloud.has_part(p) {
        return Err(ModelError::PartAbsent(p));
    }
    let vae = &model.vae;
    let parts = vae.config.parts;
    let (x, y) = cloud_inputs(cloud, true)?;
    let (z0, h0) = vae.encode_means(&x, &y)?;
    let frozen = cloud.part_indices(p);
    let mut steps = Vec::new();

    let (h, labels) = if req.tau == 0 {
        (h0, cloud.labels().to_vec())
    } else {
        let diff = model.diffusion()?;
        let schedule = &diff.schedule;
        if req.tau >= schedule.steps() {
            return Err(ModelError::TauOutOfRange { tau: req.tau, steps: schedule.steps() });
        }
        let cond = diff.z_norm.normalize(&z0);
        let mut rng = stream_rng(req.seed, 0);
        let n = cloud.len();
        let d_h = vae.config.d_h;
        let is_frozen: Vec<bool> = cloud.labels().iter().map(|&l| l == p).collect();
        let hn = diff.h_norm.normalize_rows(&h0);
        let h0_frozen = gather(&hn, &frozen);
        let y_frozen = gather(&y, &frozen);
        let mut ema = EmaLabelState::new(req.ema_alpha, y.clone())?;
        let mut h = schedule.q_sample(&hn, req.tau, &normal_tensor(&mut rng, &[n, d_h]))?;
        for t in (1..=req.tau).rev() {
            let (eps, logits) = diff.point.predict(&h, t, &cond)?;
            ema.update(&softmax_rows(&logits))?;
            let z = if t > 1 { normal_tensor(&mut rng, &[n, d_h]) } else { Tensor::zeros(&[n, d_h]) };
            h = schedule.reverse_step(&h, t, &eps, &z)?;

            let current = argmax_rows(ema.probs());
            let (targets, donors): (Vec<usize>, Vec<usize>) =
                (0..n).filter(|&i| !is_frozen[i]).partition(|&i| current[i] == p);
            let substituted = if !targets.is_empty() && !donors.is_empty() {
                let picks: Vec<usize> = if donors.len() >= targets.len() {
                    sample(&mut rng, donors.len(), targets.len()).into_iter().map(|k| donors[k]).collect()
                } else {
                    (0..targets.len()).map(|_| donors[rng.random_range(0..donors.len())]).collect()
                };
                let h_src = gather(&h, &picks);
                let y_src = gather(ema.probs(), &picks);
                scatter(&mut h, &targets, &h_src);
                scatter(ema.probs_mut(), &targets, &y_src);
                targets.len()
            } else {
                0
            };

            let (noise, rows) = if t > 1 {
                let e = normal_tensor(&mut rng, &[frozen.len(), d_h]);
                let rows = schedule.q_sample(&h0_frozen, t - 1, &e)?;
                (Some(e), rows)
            } else {
                (None, h0_frozen.clone())
            };
            scatter(&mut h, &frozen, &rows);
            scatter(ema.probs_mut(), &frozen, &y_frozen);
            steps.push(EditStep { t: t - 1, noise, frozen_rows: rows, substituted });
        }
        // Frozen rows end exactly on the original latents.
        let mut h = diff.h_norm.denormalize_rows(&h);
        scatter(&mut h, &frozen, &gather(&h0, &frozen));
        (h, ema.labels())
    };
    let out = vae.decode_points(&h, &one_hot(&labels, parts), &z0)?;
    let cloud = LabeledPointCloud::new(out.into_data(), cloud.dim(), labels, parts)?;
    Ok(EditOutput { cloud, frozen, steps })
}

/// Segmentation-head labels for the posterior-mean latents of `cloud`
/// perturbed to step `t`.
pub fn label_probe(model: &LatentModel, cloud: &LabeledPointCloud, t: usize, rng: &mut impl Rng) -> Result<Vec<u16>> {
    model.check_cloud(cloud)?;
    let diff = model.diffusion()?;
    let (x, y) = cloud_inputs(cloud, true)?;
    let (z0, h0) = model.vae.encode_means(&x, &y)?;
    let hn = diff.h_norm.normalize_rows(&h0);
    let h_t = diff.schedule.q_sample(&hn, t, &normal_tensor(rng, hn.shape()))?;
    let (_, logits) = diff.point.predict(&h_t, t, &diff.z_norm.normalize(&z0))?;
    Ok(argmax_rows(&logits))
}
