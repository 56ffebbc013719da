use pcgen_nn::{
    max_pool_backward, max_pool_points, prefixed, prefixed_mut, softmax_xent, Activation, MlpCache, MlpStack,
    Parameterized, Tensor,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::util::col_sums;

/// Width of the sinusoidal step encoding.
pub const SINUSOID_DIM: usize = 64;

/// `[sin(t w_i), cos(t w_i)]` with geometric frequencies `w_i`.
pub fn sinusoid(t: usize) -> Vec<f64> {
    let half = SINUSOID_DIM / 2;
    let mut out = vec![0.0; SINUSOID_DIM];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        let a = t as f64 * freq;
        out[i] = a.sin();
        out[half + i] = a.cos();
    }
    out
}

/// Column means summed in sorted order, so the result does not depend on
/// row order.
fn mean_rows(t: &Tensor) -> Vec<f64> {
    let (n, k) = (t.rows(), t.cols());
    let mut col = vec![0.0; n];
    (0..k)
        .map(|j| {
            for (i, v) in col.iter_mut().enumerate() {
                *v = t.data()[i * k + j];
            }
            col.sort_unstable_by(f64::total_cmp);
            col.iter().sum::<f64>() / n as f64
        })
        .collect()
}

fn time_mlp(width: usize, rng: &mut impl Rng) -> MlpStack {
    MlpStack::new(&[SINUSOID_DIM, width, width], rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointDenoiserConfig {
    pub d_h: usize,
    pub d_z: usize,
    pub parts: usize,
    pub hidden: usize,
    pub time_dim: usize,
}

/// Shared-trunk denoiser over latent points with a noise head and a
/// segmentation head.
///
/// The trunk maps `[h_t, temb, z0]` per point and appends the max- and
/// mean-pooled trunk features, giving the shared representation `r_c`. Both
/// heads read `[r_c, h_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDenoiser {
    pub config: PointDenoiserConfig,
    pub time: MlpStack,
    pub trunk: MlpStack,
    pub eps_head: MlpStack,
    pub seg_head: MlpStack,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PointLossTerms {
    pub total: f64,
    pub noise: f64,
    /// `None` when the cloud is unlabeled.
    pub ce: Option<f64>,
}

struct PointCaches {
    time: MlpCache,
    trunk: MlpCache,
    pool: pcgen_nn::PoolCache,
    eps: MlpCache,
    seg: MlpCache,
}

impl PointDenoiser {
    pub fn new(config: PointDenoiserConfig, rng: &mut impl Rng) -> Result<Self> {
        let PointDenoiserConfig { d_h, d_z, parts, hidden: w, time_dim } = config;
        if [d_h, d_z, parts, w, time_dim].contains(&0) {
            return Err(ModelError::Config(format!("invalid point denoiser config {config:?}")));
        }
        let leaky = [Activation::Leaky, Activation::Leaky];
        let mut eps_head = MlpStack::new(&[3 * w + d_h, w, d_h], rng);
        eps_head.scale_output(0.1);
        let mut seg_head = MlpStack::new(&[3 * w + d_h, w, parts], rng);
        seg_head.scale_output(0.1);
        Ok(Self {
            config,
            time: time_mlp(time_dim, rng),
            trunk: MlpStack::with_activations(&[d_h + time_dim + d_z, w, w], &leaky, rng)?,
            eps_head,
            seg_head,
        })
    }

    fn check(&self, h_t: &Tensor, t: usize, z0: &[f64]) -> Result<usize> {
        let n = h_t.rows();
        if h_t.shape() != [n, self.config.d_h] || n == 0 || z0.len() != self.config.d_z || t == 0 {
            return Err(ModelError::Shape(format!(
                "point denoiser got h_t {:?}, z0 width {}, t {t}",
                h_t.shape(),
                z0.len()
            )));
        }
        Ok(n)
    }

    /// Predicted noise (`n x d_h`) and label logits (`n x c`).
    pub fn predict(&self, h_t: &Tensor, t: usize, z0: &[f64]) -> Result<(Tensor, Tensor)> {
        let n = self.check(h_t, t, z0)?;
        let temb = self.time.infer(&Tensor::matrix(1, SINUSOID_DIM, sinusoid(t))?)?;
        let f = self.trunk.infer(&Tensor::hcat(&[h_t, &Tensor::broadcast_row(temb.data(), n), &Tensor::broadcast_row(z0, n)])?)?;
        let (ctx, _) = max_pool_points(&f)?;
        let mean = mean_rows(&f);
        let head_in = Tensor::hcat(&[&f, &Tensor::broadcast_row(&ctx, n), &Tensor::broadcast_row(&mean, n), h_t])?;
        Ok((self.eps_head.infer(&head_in)?, self.seg_head.infer(&head_in)?))
    }

    /// Noise MSE plus `lambda_seg` times label cross-entropy at step `t`.
    /// Unlabeled clouds (`labels = None`) skip the cross-entropy term.
    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        h_t: &Tensor,
        t: usize,
        z0: &[f64],
        eps: &Tensor,
        labels: Option<&[u16]>,
        lambda_seg: f64,
        grads: Option<&mut PointDenoiser>,
    ) -> Result<PointLossTerms> {
        let n = self.check(h_t, t, z0)?;
        if eps.shape() != h_t.shape() {
            return Err(ModelError::Shape("noise shape differs from h_t".into()));
        }
        let d_h = self.config.d_h;
        let w = self.config.hidden;
        let (temb, time) = self.time.forward(&Tensor::matrix(1, SINUSOID_DIM, sinusoid(t))?)?;
        let trunk_in = Tensor::hcat(&[h_t, &Tensor::broadcast_row(temb.data(), n), &Tensor::broadcast_row(z0, n)])?;
        let (f, trunk) = self.trunk.forward(&trunk_in)?;
        let (ctx, pool) = max_pool_points(&f)?;
        let mean = mean_rows(&f);
        let head_in = Tensor::hcat(&[&f, &Tensor::broadcast_row(&ctx, n), &Tensor::broadcast_row(&mean, n), h_t])?;
        let (eps_hat, eps_c) = self.eps_head.forward(&head_in)?;
        let (logits, seg) = self.seg_head.forward(&head_in)?;

        let noise = eps_hat.data().iter().zip(eps.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (n * d_h) as f64;
        let ce = labels.map(|l| softmax_xent(&logits, l)).transpose()?;
        let total = noise + ce.as_ref().map_or(0.0, |(c, _)| lambda_seg * c);
        let terms = PointLossTerms { total, noise, ce: ce.as_ref().map(|(c, _)| *c) };
        let Some(grads) = grads else { return Ok(terms) };

        let c = PointCaches { time, trunk, pool, eps: eps_c, seg };
        let scale = 2.0 / (n * d_h) as f64;
        let deps = Tensor::matrix(n, d_h, eps_hat.data().iter().zip(eps.data()).map(|(a, b)| scale * (a - b)).collect())?;
        let mut dhead = self.eps_head.backward(&c.eps, &deps, &mut grads.eps_head)?;
        if let Some((_, dlogits)) = ce {
            let dlogits = dlogits.map(|v| lambda_seg * v);
            dhead.add_scaled(&self.seg_head.backward(&c.seg, &dlogits, &mut grads.seg_head)?, 1.0)?;
        }
        let mut df = dhead.cols_range(0, w);
        let dctx = col_sums(&dhead, w, 2 * w);
        df.add_scaled(&max_pool_backward(&c.pool, &dctx)?, 1.0)?;
        let dmean: Vec<f64> = col_sums(&dhead, 2 * w, 3 * w).into_iter().map(|v| v / n as f64).collect();
        df.add_scaled(&Tensor::broadcast_row(&dmean, n), 1.0)?;
        let dtrunk = self.trunk.backward(&c.trunk, &df, &mut grads.trunk)?;
        let dtemb = col_sums(&dtrunk, d_h, d_h + self.config.time_dim);
        self.time.backward_params(&c.time, &Tensor::matrix(1, dtemb.len(), dtemb)?, &mut grads.time)?;
        Ok(terms)
    }
}

impl Parameterized for PointDenoiser {
    fn params(&self) -> Vec<(String, &Tensor)> {
        prefixed("time", self.time.params())
            .chain(prefixed("trunk", self.trunk.params()))
            .chain(prefixed("eps_head", self.eps_head.params()))
            .chain(prefixed("seg_head", self.seg_head.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let PointDenoiser { time, trunk, eps_head, seg_head, .. } = self;
        prefixed_mut("time", time.params_mut())
            .chain(prefixed_mut("trunk", trunk.params_mut()))
            .chain(prefixed_mut("eps_head", eps_head.params_mut()))
            .chain(prefixed_mut("seg_head", seg_head.params_mut()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalDenoiserConfig {
    pub d_z: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub time_dim: usize,
}

/// Residual MLP over `[z_t, temb]` predicting the noise on `z_t`. Rows are
/// independent samples, each with its own step.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalDenoiser {
    pub config: GlobalDenoiserConfig,
    pub time: MlpStack,
    pub input: MlpStack,
    pub blocks: Vec<MlpStack>,
    pub output: MlpStack,
}

impl GlobalDenoiser {
    pub fn new(config: GlobalDenoiserConfig, rng: &mut impl Rng) -> Result<Self> {
        let GlobalDenoiserConfig { d_z, hidden: w, blocks, time_dim } = config;
        if [d_z, w, time_dim].contains(&0) {
            return Err(ModelError::Config(format!("invalid global denoiser config {config:?}")));
        }
        let blocks = (0..blocks)
            .map(|_| {
                let mut b = MlpStack::new(&[w, w, w], rng);
                b.scale_output(0.1);
                b
            })
            .collect();
        let mut output = MlpStack::new(&[w, d_z], rng);
        output.scale_output(0.1);
        Ok(Self {
            config,
            time: time_mlp(time_dim, rng),
            input: MlpStack::with_activations(&[d_z + time_dim, w], &[Activation::Leaky], rng)?,
            blocks,
            output,
        })
    }

    fn embed(&self, ts: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(ts.len() * SINUSOID_DIM);
        for &t in ts {
            data.extend(sinusoid(t));
        }
        Ok(Tensor::matrix(ts.len(), SINUSOID_DIM, data)?)
    }

    fn check(&self, z_t: &Tensor, ts: &[usize]) -> Result<()> {
        if z_t.shape() != [ts.len(), self.config.d_z] || ts.is_empty() || ts.contains(&0) {
            return Err(ModelError::Shape(format!("global denoiser got z_t {:?} for {} steps", z_t.shape(), ts.len())));
        }
        Ok(())
    }

    pub fn predict(&self, z_t: &Tensor, ts: &[usize]) -> Result<Tensor> {
        self.check(z_t, ts)?;
        let temb = self.time.infer(&self.embed(ts)?)?;
        let mut a = self.input.infer(&Tensor::hcat(&[z_t, &temb])?)?;
        for b in &self.blocks {
            let r = b.infer(&a)?;
            a.add_scaled(&r, 1.0)?;
        }
        Ok(self.output.infer(&a)?)
    }

    /// Mean squared noise error over all rows and entries.
    pub fn loss(&self, z_t: &Tensor, ts: &[usize], eps: &Tensor, grads: Option<&mut GlobalDenoiser>) -> Result<f64> {
        self.check(z_t, ts)?;
        if eps.shape() != z_t.shape() {
            return Err(ModelError::Shape("noise shape differs from z_t".into()));
        }
        let (temb, time_c) = self.time.forward(&self.embed(ts)?)?;
        let (mut a, in_c) = self.input.forward(&Tensor::hcat(&[z_t, &temb])?)?;
        let mut block_c = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (r, c) = b.forward(&a)?;
            a.add_scaled(&r, 1.0)?;
            block_c.push(c);
        }
        let (out, out_c) = self.output.forward(&a)?;
        let m = out.len() as f64;
        let loss = out.data().iter().zip(eps.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / m;
        let Some(grads) = grads else { return Ok(loss) };

        let dout = Tensor::new(out.shape().to_vec(), out.data().iter().zip(eps.data()).map(|(a, b)| 2.0 * (a - b) / m).collect())?;
        let mut da = self.output.backward(&out_c, &dout, &mut grads.output)?;
        for (k, b) in self.blocks.iter().enumerate().rev() {
            let dr = b.backward(&block_c[k], &da, &mut grads.blocks[k])?;
            da.add_scaled(&dr, 1.0)?;
        }
        let din = self.input.backward(&in_c, &da, &mut grads.input)?;
        let dtemb = din.cols_range(self.config.d_z, din.cols());
        self.time.backward_params(&time_c, &dtemb, &mut grads.time)?;
        Ok(loss)
    }
}

impl Parameterized for GlobalDenoiser {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<_> = prefixed("time", self.time.params()).chain(prefixed("input", self.input.params())).collect();
        for (k, b) in self.blocks.iter().enumerate() {
            out.extend(prefixed(&format!("block{k}"), b.params()));
        }
        out.extend(prefixed("output", self.output.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let GlobalDenoiser { time, input, blocks, output, .. } = self;
        let mut out: Vec<_> = prefixed_mut("time", time.params_mut()).chain(prefixed_mut("input", input.params_mut())).collect();
        for (k, b) in blocks.iter_mut().enumerate() {
            out.extend(prefixed_mut(&format!("block{k}"), b.params_mut()));
        }
        out.extend(prefixed_mut("output", output.params_mut()));
        out
    }
}
