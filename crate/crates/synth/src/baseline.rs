use pcgen_core::{LabeledPointCloud, PointCloudSet};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SynthError};
use crate::item_rng;

/// Noise clouds matched to `reference` part by part.
///
/// Each part gets a diagonal Gaussian with the mean and per-axis standard
/// deviation of all its points in `reference`. Output cloud `i` copies the
/// label layout of reference cloud `i mod len` and draws every point from the
/// Gaussian of its label.
pub fn gaussian_baseline(reference: &PointCloudSet, count: usize, seed: u64) -> Result<PointCloudSet> {
    let Some(first) = reference.get(0) else {
        return Err(SynthError::EmptySet);
    };
    let (dim, parts) = (first.dim(), reference.vocab().len());
    let mut sum = vec![0.0; parts * dim];
    let mut sq = vec![0.0; parts * dim];
    let mut counts = vec![0usize; parts];
    for cloud in reference {
        for (i, &l) in cloud.labels().iter().enumerate() {
            let l = l as usize;
            counts[l] += 1;
            for (k, &v) in cloud.point(i).iter().enumerate() {
                sum[l * dim + k] += v;
                sq[l * dim + k] += v * v;
            }
        }
    }
    let mut mean = vec![0.0; parts * dim];
    let mut std = vec![0.0; parts * dim];
    for l in 0..parts {
        if counts[l] == 0 {
            continue;
        }
        for k in 0..dim {
            let m = sum[l * dim + k] / counts[l] as f64;
            mean[l * dim + k] = m;
            std[l * dim + k] = (sq[l * dim + k] / counts[l] as f64 - m * m).max(0.0).sqrt();
        }
    }
    let clouds = (0..count)
        .map(|i| {
            let layout = &reference.clouds()[i % reference.len()];
            let mut rng = item_rng(seed, i as u64);
            let mut pts = Vec::with_capacity(layout.len() * dim);
            for &l in layout.labels() {
                for k in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    pts.push(mean[l as usize * dim + k] + std[l as usize * dim + k] * z);
                }
            }
            LabeledPointCloud::new(pts, dim, layout.labels().to_vec(), parts)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PointCloudSet::new(format!("gaussian-s{seed}"), reference.vocab().clone(), clouds)?)
}
