#![allow(dead_code)]

use pcgen_core::{LabeledPointCloud, PartVocabulary, PointCloudSet};
use pcgen_model::*;
use pcgen_nn::{Parameterized, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PARTS: usize = 3;

pub fn vae_config() -> VaeConfig {
    VaeConfig { dim: 2, parts: PARTS, d_z: 3, d_h: 4, hidden: 6 }
}

pub fn diffusion_config(steps: usize) -> DiffusionConfig {
    DiffusionConfig {
        schedule: ScheduleConfig { steps, beta_start: 0.01, beta_end: 0.3 },
        point_hidden: 8,
        global_hidden: 8,
        global_blocks: 1,
        time_dim: 8,
    }
}

pub fn perturb<M: Parameterized>(m: &mut M, rng: &mut ChaCha8Rng, s: f64) {
    for (_, t) in m.params_mut() {
        for v in t.data_mut() {
            *v += s * rng.random_range(-1.0..1.0);
        }
    }
}

/// Untrained model with randomized weights and non-trivial latent norms.
pub fn tiny_model(seed: u64, steps: usize) -> LatentModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vae = Vae::new(vae_config(), &mut rng).unwrap();
    let mut diff = Diffusion::new(&vae.config, diffusion_config(steps), &mut rng).unwrap();
    perturb(&mut diff.point, &mut rng, 0.5);
    perturb(&mut diff.global, &mut rng, 0.2);
    for v in diff.h_norm.mean.data_mut() {
        *v = rng.random_range(-0.5..0.5);
    }
    let s = rng.random_range(0.5..2.0);
    for v in diff.h_norm.std.data_mut() {
        *v = s;
    }
    for v in diff.z_norm.std.data_mut() {
        *v = rng.random_range(0.5..2.0);
    }
    let vocab = PartVocabulary::anonymous(PARTS).unwrap();
    LatentModel::new(vocab, vae).unwrap().with_diffusion(diff).unwrap()
}

pub fn random_cloud(rng: &mut impl Rng, n: usize) -> LabeledPointCloud {
    let pts = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels = (0..n).map(|i| (i % PARTS) as u16).collect();
    LabeledPointCloud::new(pts, 2, labels, PARTS).unwrap()
}

pub fn random_set(seed: u64, clouds: usize, n: usize) -> PointCloudSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clouds = (0..clouds).map(|_| random_cloud(&mut rng, n)).collect();
    PointCloudSet::new("toy", PartVocabulary::anonymous(PARTS).unwrap(), clouds).unwrap()
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
