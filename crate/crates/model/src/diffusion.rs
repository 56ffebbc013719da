use pcgen_nn::{prefixed, prefixed_mut, Parameterized, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoiser::{GlobalDenoiser, GlobalDenoiserConfig, PointDenoiser, PointDenoiserConfig};
use crate::error::{ModelError, Result};
use crate::schedule::{NoiseSchedule, ScheduleConfig};
use crate::vae::VaeConfig;

/// Architecture of both denoisers plus the noise schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionConfig {
    pub schedule: ScheduleConfig,
    pub point_hidden: usize,
    pub global_hidden: usize,
    pub global_blocks: usize,
    pub time_dim: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self { schedule: ScheduleConfig::default(), point_hidden: 64, global_hidden: 64, global_blocks: 2, time_dim: 32 }
    }
}

/// Per-coordinate affine map between global latents and the unit-scale
/// space the global denoiser works in.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentNorm {
    pub mean: Tensor,
    pub std: Tensor,
}

impl LatentNorm {
    pub fn identity(width: usize) -> Self {
        Self { mean: Tensor::zeros(&[width]), std: Tensor::vector(vec![1.0; width]) }
    }

    /// Mean and standard deviation of `rows`, with the deviation floored at
    /// `1e-6` times the largest one (and at `1e-12`).
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else { return Err(ModelError::EmptyDataset) };
        let (n, k) = (rows.len() as f64, first.len());
        let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let mut std: Vec<f64> =
            (0..k).map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt()).collect();
        let floor = (std.iter().cloned().fold(0.0, f64::max) * 1e-6).max(1e-12);
        std.iter_mut().for_each(|s| *s = s.max(floor));
        Ok(Self { mean: Tensor::vector(mean), std: Tensor::vector(std) })
    }

    /// Per-coordinate mean over all rows of all `tensors`, with one shared
    /// scale: the root of the mean per-coordinate variance.
    pub fn fit_shared(tensors: &[Tensor]) -> Result<Self> {
        let Some(first) = tensors.first() else { return Err(ModelError::EmptyDataset) };
        let k = first.cols();
        let rows: usize = tensors.iter().map(|t| t.rows()).sum();
        let mut mean = vec![0.0; k];
        for t in tensors {
            for (m, s) in mean.iter_mut().zip(t.col_sums()) {
                *m += s;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = 0.0;
        for t in tensors {
            for i in 0..t.rows() {
                var += t.row(i).iter().zip(&mean).map(|(v, m)| (v - m).powi(2)).sum::<f64>();
            }
        }
        let std = (var / (rows * k) as f64).sqrt().max(1e-12);
        Ok(Self { mean: Tensor::vector(mean), std: Tensor::vector(vec![std; k]) })
    }

    pub fn normalize_rows(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for i in 0..out.rows() {
            let r = self.normalize(out.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }

    pub fn denormalize_rows(&self, t: &Tensor) -> Tensor {
        let mut out = t.clone();
        for i in 0..out.rows() {
            let r = self.denormalize(out.row(i));
            out.row_mut(i).copy_from_slice(&r);
        }
        out
    }

    pub fn normalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.mean.data()).zip(self.std.data()).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.mean.data()).zip(self.std.data()).map(|((v, m), s)| m + s * v).collect()
    }
}

/// Stage-2 models, their schedule and the latent normalizations.
///
/// Both denoisers work on normalized latents: `z_norm` standardizes each
/// global coordinate, `h_norm` centers the point latents and divides by one
/// shared scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion {
    pub config: DiffusionConfig,
    pub schedule: NoiseSchedule,
    pub point: PointDenoiser,
    pub global: GlobalDenoiser,
    pub z_norm: LatentNorm,
    pub h_norm: LatentNorm,
}

impl Diffusion {
    pub fn new(vae: &VaeConfig, config: DiffusionConfig, rng: &mut impl Rng) -> Result<Self> {
        let point = PointDenoiser::new(
            PointDenoiserConfig {
                d_h: vae.d_h,
                d_z: vae.d_z,
                parts: vae.parts,
                hidden: config.point_hidden,
                time_dim: config.time_dim,
            },
            rng,
        )?;
        let global = GlobalDenoiser::new(
            GlobalDenoiserConfig {
                d_z: vae.d_z,
                hidden: config.global_hidden,
                blocks: config.global_blocks,
                time_dim: config.time_dim,
            },
            rng,
        )?;
        Ok(Self {
            config,
            schedule: NoiseSchedule::new(config.schedule)?,
            point,
            global,
            z_norm: LatentNorm::identity(vae.d_z),
            h_norm: LatentNorm::identity(vae.d_h),
        })
    }

    /// Whether the denoiser widths fit `vae`.
    pub fn fits(&self, vae: &VaeConfig) -> bool {
        self.point.config.d_h == vae.d_h
            && self.point.config.d_z == vae.d_z
            && self.point.config.parts == vae.parts
            && self.global.config.d_z == vae.d_z
    }
}

impl Parameterized for Diffusion {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<_> = prefixed("point", self.point.params()).chain(prefixed("global", self.global.params())).collect();
        out.push(("z_norm.mean".into(), &self.z_norm.mean));
        out.push(("z_norm.std".into(), &self.z_norm.std));
        out.push(("h_norm.mean".into(), &self.h_norm.mean));
        out.push(("h_norm.std".into(), &self.h_norm.std));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let Diffusion { point, global, z_norm, h_norm, .. } = self;
        let mut out: Vec<_> = prefixed_mut("point", point.params_mut()).chain(prefixed_mut("global", global.params_mut())).collect();
        out.push(("z_norm.mean".into(), &mut z_norm.mean));
        out.push(("z_norm.std".into(), &mut z_norm.std));
        out.push(("h_norm.mean".into(), &mut h_norm.mean));
        out.push(("h_norm.std".into(), &mut h_norm.std));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_norm_uses_one_scale() {
        let a = Tensor::matrix(2, 2, vec![0.0, 1.0, 2.0, 1.0]).unwrap();
        let b = Tensor::matrix(2, 2, vec![0.0, 1.0, 2.0, 1.0]).unwrap();
        let norm = LatentNorm::fit_shared(&[a.clone(), b]).unwrap();
        assert_eq!(norm.mean.data(), &[1.0, 1.0]);
        // Variances 1 and 0 average to 0.5.
        assert!(norm.std.data().iter().all(|&s| (s - 0.5f64.sqrt()).abs() < 1e-15));
        let back = norm.denormalize_rows(&norm.normalize_rows(&a));
        assert!(back.data().iter().zip(a.data()).all(|(x, y)| (x - y).abs() < 1e-15));
    }

    #[test]
    fn norm_round_trips_and_standardizes() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![2.0, 5.0]];
        let norm = LatentNorm::fit(&rows).unwrap();
        let u: Vec<Vec<f64>> = rows.iter().map(|r| norm.normalize(r)).collect();
        let m: f64 = u.iter().map(|r| r[0]).sum::<f64>() / 3.0;
        let v: f64 = u.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!(m.abs() < 1e-15 && (v - 1.0).abs() < 1e-12);
        // A constant coordinate keeps a positive, floored scale.
        assert!(norm.std.data()[1] > 0.0);
        for r in &rows {
            let back = norm.denormalize(&norm.normalize(r));
            assert!(back.iter().zip(r).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}
