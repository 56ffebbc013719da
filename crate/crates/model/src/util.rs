use pcgen_nn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// RNG for item `index` of a stream seeded by `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn normal_tensor(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

pub fn one_hot(labels: &[u16], parts: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), parts]);
    for (i, &l) in labels.iter().enumerate() {
        t.data_mut()[i * parts + l as usize] = 1.0;
    }
    t
}

pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

/// Row-wise argmax, lowest index on ties.
pub fn argmax_rows(t: &Tensor) -> Vec<u16> {
    (0..t.rows())
        .map(|i| {
            let row = t.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best as u16
        })
        .collect()
}

/// `KL(N(mu, exp(ls)^2) || N(0, 1))` for one coordinate.
pub fn kl_normal(mu: f64, log_sigma: f64) -> f64 {
    0.5 * (mu * mu + (2.0 * log_sigma).exp() - 1.0 - 2.0 * log_sigma)
}

/// Sum of columns `start..end` over all rows.
pub fn col_sums(t: &Tensor, start: usize, end: usize) -> Vec<f64> {
    let mut out = vec![0.0; end - start];
    for i in 0..t.rows() {
        for (o, v) in out.iter_mut().zip(&t.row(i)[start..end]) {
            *o += v;
        }
    }
    out
}
