use pcgen_nn::{max_pool_backward, max_pool_points, prefixed, prefixed_mut, MlpCache, MlpStack, Parameterized, PoolCache, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::util::{col_sums, kl_normal, normal_tensor};

/// Initial bias of every log-sigma output, so posteriors start narrow.
pub const INIT_LOG_SIGMA: f64 = -3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VaeConfig {
    /// Point dimension.
    pub dim: usize,
    /// Number of part labels.
    pub parts: usize,
    pub d_z: usize,
    pub d_h: usize,
    pub hidden: usize,
}

impl VaeConfig {
    pub fn new(dim: usize, parts: usize) -> Self {
        Self { dim, parts, d_z: 16, d_h: 4, hidden: 64 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 2 || self.dim == 3) || self.parts == 0 || self.d_z == 0 || self.d_h == 0 || self.hidden == 0 {
            return Err(ModelError::Config(format!("invalid VAE config {self:?}")));
        }
        Ok(())
    }

    /// Coordinates copied straight through the point encoder and decoder.
    fn skip(&self) -> usize {
        self.dim.min(self.d_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeLossWeights {
    pub lambda_z: f64,
    pub lambda_h: f64,
}

impl Default for VaeLossWeights {
    fn default() -> Self {
        Self { lambda_z: 1e-3, lambda_h: 1e-3 }
    }
}

/// Reparameterization noise for one ELBO evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeNoise {
    pub eps_z: Vec<f64>,
    pub eps_h: Tensor,
}

impl VaeNoise {
    pub fn sample(rng: &mut impl Rng, points: usize, cfg: &VaeConfig) -> Self {
        let eps_z = normal_tensor(rng, &[cfg.d_z]).into_data();
        Self { eps_z, eps_h: normal_tensor(rng, &[points, cfg.d_h]) }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ElboTerms {
    pub total: f64,
    pub rec: f64,
    pub kl_z: f64,
    pub kl_h: f64,
}

/// Stage-1 model.
///
/// * `phi_z`: pointwise MLP, max-pool, head emitting `(mu_z, log_sigma_z)`.
/// * `phi_h`: pointwise MLP over `[x, y, z0]` emitting `(mu_h, log_sigma_h)`;
///   the first coordinates of `mu_h` add `x` as a skip.
/// * `xi_h`: pointwise embedding of `[h, y, z0]` max-pooled into a context,
///   then a pointwise decoder over `[h, y, z0, ctx]`; the output adds the
///   leading coordinates of `h` as a skip.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae {
    pub config: VaeConfig,
    pub phi_z_point: MlpStack,
    pub phi_z_head: MlpStack,
    pub phi_h: MlpStack,
    pub xi_embed: MlpStack,
    pub xi_dec: MlpStack,
}

fn set_log_sigma_bias(net: &mut MlpStack, from: usize) {
    let mut params = net.params_mut();
    let bias = params.last_mut().unwrap().1.data_mut();
    bias[from..].iter_mut().for_each(|b| *b = INIT_LOG_SIGMA);
}

fn bcast(row: &[f64], n: usize) -> Tensor {
    Tensor::broadcast_row(row, n)
}

impl Vae {
    pub fn new(config: VaeConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let VaeConfig { dim, parts, d_z, d_h, hidden: w } = config;
        let mut phi_z_head = MlpStack::new(&[w, w, 2 * d_z], rng);
        phi_z_head.scale_output(0.1);
        set_log_sigma_bias(&mut phi_z_head, d_z);
        let mut phi_h = MlpStack::new(&[dim + parts + d_z, w, w, 2 * d_h], rng);
        phi_h.scale_output(0.1);
        set_log_sigma_bias(&mut phi_h, d_h);
        let mut xi_dec = MlpStack::new(&[d_h + parts + d_z + w, w, w, dim], rng);
        xi_dec.scale_output(0.1);
        let leaky = [pcgen_nn::Activation::Leaky, pcgen_nn::Activation::Leaky];
        Ok(Self {
            config,
            phi_z_point: MlpStack::with_activations(&[dim, w, w], &leaky, rng)?,
            phi_z_head,
            phi_h,
            xi_embed: MlpStack::with_activations(&[d_h + parts + d_z, w, w], &leaky, rng)?,
            xi_dec,
        })
    }

    fn check_cloud(&self, x: &Tensor, y: &Tensor) -> Result<usize> {
        let n = x.rows();
        if x.shape() != [n, self.config.dim] || y.shape() != [n, self.config.parts] || n == 0 {
            return Err(ModelError::Shape(format!(
                "expected n x {} points and n x {} labels, got {:?} and {:?}",
                self.config.dim,
                self.config.parts,
                x.shape(),
                y.shape()
            )));
        }
        Ok(n)
    }

    /// `(mu_z, log_sigma_z)`.
    pub fn encode_global(&self, x: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.shape().len() != 2 || x.cols() != self.config.dim || x.rows() == 0 {
            return Err(ModelError::Shape(format!("expected n x {} points, got {:?}", self.config.dim, x.shape())));
        }
        let f = self.phi_z_point.infer(x)?;
        let (g, _) = max_pool_points(&f)?;
        let out = self.phi_z_head.infer(&Tensor::matrix(1, g.len(), g)?)?;
        let d_z = self.config.d_z;
        Ok((out.data()[..d_z].to_vec(), out.data()[d_z..].to_vec()))
    }

    /// `(mu_h, log_sigma_h)`, one row per point. `y` is the `n x c`
    /// conditioning: one-hot labels, or zeros for an unlabeled cloud.
    pub fn encode_points(&self, x: &Tensor, y: &Tensor, z0: &[f64]) -> Result<(Tensor, Tensor)> {
        let n = self.check_cloud(x, y)?;
        self.check_z(z0)?;
        let out = self.phi_h.infer(&Tensor::hcat(&[x, y, &bcast(z0, n)])?)?;
        Ok(self.split_h(&out, x))
    }

    fn split_h(&self, out: &Tensor, x: &Tensor) -> (Tensor, Tensor) {
        let d_h = self.config.d_h;
        let mut mu = out.cols_range(0, d_h);
        for i in 0..x.rows() {
            for k in 0..self.config.skip() {
                mu.row_mut(i)[k] += x.get(i, k);
            }
        }
        (mu, out.cols_range(d_h, 2 * d_h))
    }

    fn check_z(&self, z0: &[f64]) -> Result<()> {
        if z0.len() != self.config.d_z {
            return Err(ModelError::Shape(format!("z0 width {} vs d_z {}", z0.len(), self.config.d_z)));
        }
        Ok(())
    }

    pub fn decode_points(&self, h: &Tensor, y: &Tensor, z0: &[f64]) -> Result<Tensor> {
        let n = h.rows();
        if h.shape() != [n, self.config.d_h] || y.shape() != [n, self.config.parts] || n == 0 {
            return Err(ModelError::Shape(format!("decode got h {:?} and y {:?}", h.shape(), y.shape())));
        }
        self.check_z(z0)?;
        let zb = bcast(z0, n);
        let e = self.xi_embed.infer(&Tensor::hcat(&[h, y, &zb])?)?;
        let (ctx, _) = max_pool_points(&e)?;
        let mut out = self.xi_dec.infer(&Tensor::hcat(&[h, y, &zb, &bcast(&ctx, n)])?)?;
        for i in 0..n {
            for k in 0..self.config.skip() {
                out.row_mut(i)[k] += h.get(i, k);
            }
        }
        Ok(out)
    }

    /// Posterior means `(z0, h0)`.
    pub fn encode_means(&self, x: &Tensor, y: &Tensor) -> Result<(Vec<f64>, Tensor)> {
        let (mu_z, _) = self.encode_global(x)?;
        let (mu_h, _) = self.encode_points(x, y, &mu_z)?;
        Ok((mu_z, mu_h))
    }

    /// Negated ELBO for one cloud with explicit reparameterization noise.
    pub fn elbo_terms(&self, x: &Tensor, y: &Tensor, noise: &VaeNoise, w: VaeLossWeights) -> Result<ElboTerms> {
        Ok(self.elbo_pass(x, y, noise, w, None)?)
    }

    /// Negated ELBO and its gradient, accumulated into `grads`.
    pub fn elbo_loss(
        &self,
        x: &Tensor,
        y: &Tensor,
        noise: &VaeNoise,
        w: VaeLossWeights,
        grads: &mut Vae,
    ) -> Result<ElboTerms> {
        self.elbo_pass(x, y, noise, w, Some(grads))
    }

    fn elbo_pass(
        &self,
        x: &Tensor,
        y: &Tensor,
        noise: &VaeNoise,
        w: VaeLossWeights,
        grads: Option<&mut Vae>,
    ) -> Result<ElboTerms> {
        let n = self.check_cloud(x, y)?;
        let VaeConfig { dim, d_z, d_h, .. } = self.config;
        if noise.eps_z.len() != d_z || noise.eps_h.shape() != [n, d_h] {
            return Err(ModelError::Shape("reparameterization noise does not match the cloud".into()));
        }

        let (f, f_cache) = self.phi_z_point.forward(x)?;
        let (g, g_pool) = max_pool_points(&f)?;
        let (oz, oz_cache) = self.phi_z_head.forward(&Tensor::matrix(1, g.len(), g)?)?;
        let (mu_z, ls_z) = (&oz.data()[..d_z], &oz.data()[d_z..]);
        let z0: Vec<f64> = (0..d_z).map(|k| mu_z[k] + ls_z[k].exp() * noise.eps_z[k]).collect();
        let zb = bcast(&z0, n);

        let (oh, oh_cache) = self.phi_h.forward(&Tensor::hcat(&[x, y, &zb])?)?;
        let (mu_h, ls_h) = self.split_h(&oh, x);
        let mut h = mu_h.clone();
        for (i, v) in h.data_mut().iter_mut().enumerate() {
            *v += ls_h.data()[i].exp() * noise.eps_h.data()[i];
        }

        let (e, e_cache) = self.xi_embed.forward(&Tensor::hcat(&[&h, y, &zb])?)?;
        let (ctx, ctx_pool) = max_pool_points(&e)?;
        let (mut xr, d_cache) = self.xi_dec.forward(&Tensor::hcat(&[&h, y, &zb, &bcast(&ctx, n)])?)?;
        for i in 0..n {
            for k in 0..self.config.skip() {
                xr.row_mut(i)[k] += h.get(i, k);
            }
        }

        let rec = xr.data().iter().zip(x.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (n * dim) as f64;
        let kl_z: f64 = (0..d_z).map(|k| kl_normal(mu_z[k], ls_z[k])).sum();
        let kl_h = mu_h.data().iter().zip(ls_h.data()).map(|(&m, &s)| kl_normal(m, s)).sum::<f64>() / n as f64;
        let terms = ElboTerms { total: rec + w.lambda_z * kl_z + w.lambda_h * kl_h, rec, kl_z, kl_h };
        if !terms.total.is_finite() {
            return Err(ModelError::Nn(pcgen_nn::NnError::NonFinite("VAE loss".into())));
        }
        let Some(grads) = grads else { return Ok(terms) };

        let caches = ElboCaches { f_cache, g_pool, oz_cache, oh_cache, e_cache, ctx_pool, d_cache };
        self.elbo_backward(x, noise, w, (&mu_h, &ls_h), &xr, (mu_z, ls_z), caches, grads)?;
        Ok(terms)
    }

    #[allow(clippy::too_many_arguments)]
    fn elbo_backward(
        &self,
        x: &Tensor,
        noise: &VaeNoise,
        w: VaeLossWeights,
        (mu_h, ls_h): (&Tensor, &Tensor),
        xr: &Tensor,
        (mu_z, ls_z): (&[f64], &[f64]),
        c: ElboCaches,
        grads: &mut Vae,
    ) -> Result<()> {
        let VaeConfig { dim, parts, d_z, d_h, .. } = self.config;
        let n = x.rows();
        let skip = self.config.skip();
        let scale = 2.0 / (n * dim) as f64;
        let dxr = Tensor::matrix(n, dim, xr.data().iter().zip(x.data()).map(|(a, b)| scale * (a - b)).collect())?;

        // Decoder: input columns are [h | y | z0 | ctx].
        let din = self.xi_dec.backward(&c.d_cache, &dxr, &mut grads.xi_dec)?;
        let mut dh = din.cols_range(0, d_h);
        for i in 0..n {
            for k in 0..skip {
                dh.row_mut(i)[k] += dxr.get(i, k);
            }
        }
        let zc = d_h + parts;
        let mut dz0 = col_sums(&din, zc, zc + d_z);
        let dctx = col_sums(&din, zc + d_z, din.cols());
        let de = max_pool_backward(&c.ctx_pool, &dctx)?;
        let dein = self.xi_embed.backward(&c.e_cache, &de, &mut grads.xi_embed)?;
        dh.add_scaled(&dein.cols_range(0, d_h), 1.0)?;
        for (a, b) in dz0.iter_mut().zip(col_sums(&dein, zc, zc + d_z)) {
            *a += b;
        }

        // h = mu_h + sigma_h * eps_h, plus the KL_h gradient.
        let kh = w.lambda_h / n as f64;
        let mut doh = Tensor::zeros(&[n, 2 * d_h]);
        for i in 0..n {
            for k in 0..d_h {
                let (m, s) = (mu_h.get(i, k), ls_h.get(i, k));
                let sig = s.exp();
                let g = dh.get(i, k);
                let row = doh.row_mut(i);
                row[k] = g + kh * m;
                row[d_h + k] = g * sig * noise.eps_h.get(i, k) + kh * (sig * sig - 1.0);
            }
        }
        let dhin = self.phi_h.backward(&c.oh_cache, &doh, &mut grads.phi_h)?;
        let xc = dim + parts;
        for (a, b) in dz0.iter_mut().zip(col_sums(&dhin, xc, xc + d_z)) {
            *a += b;
        }

        // z0 = mu_z + sigma_z * eps_z, plus the KL_z gradient.
        let mut doz = vec![0.0; 2 * d_z];
        for k in 0..d_z {
            let sig = ls_z[k].exp();
            doz[k] = dz0[k] + w.lambda_z * mu_z[k];
            doz[d_z + k] = dz0[k] * sig * noise.eps_z[k] + w.lambda_z * (sig * sig - 1.0);
        }
        let dg = self.phi_z_head.backward(&c.oz_cache, &Tensor::matrix(1, 2 * d_z, doz)?, &mut grads.phi_z_head)?;
        let df = max_pool_backward(&c.g_pool, dg.data())?;
        self.phi_z_point.backward_params(&c.f_cache, &df, &mut grads.phi_z_point)?;
        Ok(())
    }
}

struct ElboCaches {
    f_cache: MlpCache,
    g_pool: PoolCache,
    oz_cache: MlpCache,
    oh_cache: MlpCache,
    e_cache: MlpCache,
    ctx_pool: PoolCache,
    d_cache: MlpCache,
}

impl Parameterized for Vae {
    fn params(&self) -> Vec<(String, &Tensor)> {
        prefixed("phi_z.point", self.phi_z_point.params())
            .chain(prefixed("phi_z.head", self.phi_z_head.params()))
            .chain(prefixed("phi_h", self.phi_h.params()))
            .chain(prefixed("xi_h.embed", self.xi_embed.params()))
            .chain(prefixed("xi_h.dec", self.xi_dec.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let Vae { phi_z_point, phi_z_head, phi_h, xi_embed, xi_dec, .. } = self;
        prefixed_mut("phi_z.point", phi_z_point.params_mut())
            .chain(prefixed_mut("phi_z.head", phi_z_head.params_mut()))
            .chain(prefixed_mut("phi_h", phi_h.params_mut()))
            .chain(prefixed_mut("xi_h.embed", xi_embed.params_mut()))
            .chain(prefixed_mut("xi_h.dec", xi_dec.params_mut()))
            .collect()
    }
}
