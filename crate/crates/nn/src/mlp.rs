use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{NnError, Result};
use crate::params::Parameterized;
use crate::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Leaky,
}

impl Activation {
    fn apply(self, v: &mut [f64]) {
        if self == Activation::Leaky {
            for x in v {
                if *x <= 0.0 {
                    *x *= LEAKY_SLOPE;
                }
            }
        }
    }
}

/// Affine layer `y = x W + b` with `W` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn new(fan_in: usize, fan_out: usize, gain: f64, rng: &mut impl Rng) -> Self {
        let std = gain / (fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        Self {
            w: Tensor::matrix(fan_in, fan_out, w).unwrap(),
            b: Tensor::zeros(&[fan_out]),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.w.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.cols()
    }

    fn forward(&self, x: &[f64], n: usize) -> Vec<f64> {
        let (din, dout) = (self.fan_in(), self.fan_out());
        let (w, b) = (self.w.data(), self.b.data());
        let mut y = Vec::with_capacity(n * dout);
        for i in 0..n {
            y.extend_from_slice(b);
            let yi = &mut y[i * dout..];
            for (k, &a) in x[i * din..(i + 1) * din].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (yj, wj) in yi.iter_mut().zip(&w[k * dout..(k + 1) * dout]) {
                    *yj += a * wj;
                }
            }
        }
        y
    }

    /// Accumulates `dW`, `db` into `grad` and returns `dx`.
    fn backward(&self, x: &[f64], dy: &[f64], n: usize, grad: &mut Linear, need_dx: bool) -> Vec<f64> {
        let (din, dout) = (self.fan_in(), self.fan_out());
        let w = self.w.data();
        {
            let gw = grad.w.data_mut();
            for i in 0..n {
                let dyi = &dy[i * dout..(i + 1) * dout];
                for (k, &a) in x[i * din..(i + 1) * din].iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (g, d) in gw[k * dout..(k + 1) * dout].iter_mut().zip(dyi) {
                        *g += a * d;
                    }
                }
            }
        }
        let gb = grad.b.data_mut();
        for i in 0..n {
            for (g, d) in gb.iter_mut().zip(&dy[i * dout..(i + 1) * dout]) {
                *g += d;
            }
        }
        if !need_dx {
            return Vec::new();
        }
        let mut dx = vec![0.0; n * din];
        for i in 0..n {
            let dyi = &dy[i * dout..(i + 1) * dout];
            for k in 0..din {
                dx[i * din + k] = dot(dyi, &w[k * dout..(k + 1) * dout]);
            }
        }
        dx
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Chain of affine layers, each followed by its activation.
#[derive(Debug, Clone)]
pub struct MlpStack {
    layers: Vec<Linear>,
    acts: Vec<Activation>,
    generation: u64,
}

/// Equality of weights and activations; the cache generation is ignored.
impl PartialEq for MlpStack {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.acts == other.acts
    }
}

/// Everything `backward` needs from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to each layer; entry `k + 1` is the activated output of layer `k`.
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
    rows: usize,
    generation: u64,
}

impl MlpStack {
    /// Leaky activations on hidden layers, identity on the output layer.
    pub fn new(widths: &[usize], rng: &mut impl Rng) -> Self {
        let mut acts = vec![Activation::Leaky; widths.len().saturating_sub(1)];
        if let Some(last) = acts.last_mut() {
            *last = Activation::Identity;
        }
        Self::with_activations(widths, &acts, rng).expect("consistent widths")
    }

    pub fn with_activations(widths: &[usize], acts: &[Activation], rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 2 || acts.len() != widths.len() - 1 || widths.contains(&0) {
            return Err(NnError::Invalid(format!(
                "widths {widths:?} need one activation per layer and no zero width"
            )));
        }
        let layers = widths
            .windows(2)
            .zip(acts)
            .map(|(w, a)| {
                let gain = if *a == Activation::Leaky { 2f64.sqrt() } else { 1.0 };
                Linear::new(w[0], w[1], gain, rng)
            })
            .collect();
        Ok(Self { layers, acts: acts.to_vec(), generation: 0 })
    }

    pub fn from_layers(layers: Vec<Linear>, acts: Vec<Activation>) -> Result<Self> {
        if layers.is_empty() || layers.len() != acts.len() {
            return Err(NnError::Invalid("one activation per layer required".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(NnError::shape("MlpStack layers", &[pair[0].fan_out()], &[pair[1].fan_in()]));
            }
        }
        for l in &layers {
            if l.b.shape() != [l.fan_out()] {
                return Err(NnError::shape("MlpStack bias", &[l.fan_out()], l.b.shape()));
            }
        }
        Ok(Self { layers, acts, generation: 0 })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.acts
    }

    pub fn in_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.in_width()];
        w.extend(self.layers.iter().map(|l| l.fan_out()));
        w
    }

    /// Multiplies the output layer's weights by `s`.
    pub fn scale_output(&mut self, s: f64) {
        let last = self.layers.last_mut().unwrap();
        last.w = last.w.map(|v| v * s);
        self.generation += 1;
    }

    fn check_input(&self, x: &Tensor) -> Result<usize> {
        if x.shape().len() != 2 || x.cols() != self.in_width() {
            return Err(NnError::shape("MlpStack input", &[x.rows(), self.in_width()], x.shape()));
        }
        Ok(x.rows())
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, MlpCache)> {
        let n = self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.data().to_vec();
        for (layer, act) in self.layers.iter().zip(&self.acts) {
            let mut y = layer.forward(&h, n);
            act.apply(&mut y);
            inputs.push(std::mem::replace(&mut h, y));
        }
        let out = Tensor::matrix(n, self.out_width(), h.clone())?;
        out.check_finite("MlpStack forward")?;
        Ok((out, MlpCache { inputs, output: h, rows: n, generation: self.generation }))
    }

    /// Forward pass without keeping a cache.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let n = self.check_input(x)?;
        let mut h = x.data().to_vec();
        for (layer, act) in self.layers.iter().zip(&self.acts) {
            h = layer.forward(&h, n);
            act.apply(&mut h);
        }
        let out = Tensor::matrix(n, self.out_width(), h)?;
        out.check_finite("MlpStack forward")?;
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward(&self, cache: &MlpCache, dy: &Tensor, grads: &mut MlpStack) -> Result<Tensor> {
        self.backward_inner(cache, dy, grads, true)
    }

    /// As [`MlpStack::backward`] but skips the input gradient.
    pub fn backward_params(&self, cache: &MlpCache, dy: &Tensor, grads: &mut MlpStack) -> Result<()> {
        self.backward_inner(cache, dy, grads, false).map(|_| ())
    }

    fn backward_inner(&self, cache: &MlpCache, dy: &Tensor, grads: &mut MlpStack, need_dx: bool) -> Result<Tensor> {
        if cache.generation != self.generation {
            return Err(NnError::StaleCache { cached: cache.generation, current: self.generation });
        }
        let n = cache.rows;
        if dy.shape() != [n, self.out_width()] {
            return Err(NnError::shape("MlpStack output grad", &[n, self.out_width()], dy.shape()));
        }
        if grads.widths() != self.widths() {
            return Err(NnError::shape("MlpStack grads", &self.widths(), &grads.widths()));
        }
        let mut g = dy.data().to_vec();
        for k in (0..self.layers.len()).rev() {
            if self.acts[k] == Activation::Leaky {
                let out = if k + 1 < self.layers.len() { &cache.inputs[k + 1] } else { &cache.output };
                for (gi, &o) in g.iter_mut().zip(out) {
                    if o <= 0.0 {
                        *gi *= LEAKY_SLOPE;
                    }
                }
            }
            let want_dx = need_dx || k > 0;
            g = self.layers[k].backward(&cache.inputs[k], &g, n, &mut grads.layers[k], want_dx);
        }
        if !need_dx {
            return Tensor::matrix(0, self.in_width(), Vec::new());
        }
        Tensor::matrix(n, self.in_width(), g)
    }
}

impl Parameterized for MlpStack {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (k, l) in self.layers.iter().enumerate() {
            out.push((format!("l{k}.w"), &l.w));
            out.push((format!("l{k}.b"), &l.b));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.generation += 1;
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for (k, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("l{k}.w"), &mut l.w));
            out.push((format!("l{k}.b"), &mut l.b));
        }
        out
    }
}
