use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Mean over rows of `-log softmax(logits)[target]`, with its gradient.
pub fn softmax_xent(logits: &Tensor, targets: &[u16]) -> Result<(f64, Tensor)> {
    let (n, c) = (logits.rows(), logits.cols());
    if logits.shape().len() != 2 || targets.len() != n || n == 0 {
        return Err(NnError::shape("softmax_xent", &[targets.len(), c], logits.shape()));
    }
    let mut grad = Vec::with_capacity(n * c);
    let mut loss = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let t = t as usize;
        if t >= c {
            return Err(NnError::LabelOutOfRange { label: t, classes: c });
        }
        let row = logits.row(i);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let log_z = m + z.ln();
        loss += log_z - row[t];
        for (j, &v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            grad.push((p - if j == t { 1.0 } else { 0.0 }) / n as f64);
        }
    }
    let loss = loss / n as f64;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("softmax_xent".into()));
    }
    Ok((loss, Tensor::matrix(n, c, grad)?))
}

/// Row index of each column maximum; the lowest index wins ties.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolCache {
    pub argmax: Vec<usize>,
    pub rows: usize,
}

/// Column-wise max over the rows of an `n × k` matrix.
pub fn max_pool_points(x: &Tensor) -> Result<(Vec<f64>, PoolCache)> {
    let (n, k) = (x.rows(), x.cols());
    if x.shape().len() != 2 || n == 0 {
        return Err(NnError::Invalid(format!("max pool needs a non-empty matrix, got {:?}", x.shape())));
    }
    let mut best = x.row(0).to_vec();
    let mut argmax = vec![0; k];
    for i in 1..n {
        for ((b, a), &v) in best.iter_mut().zip(argmax.iter_mut()).zip(x.row(i)) {
            if v > *b {
                *b = v;
                *a = i;
            }
        }
    }
    Ok((best, PoolCache { argmax, rows: n }))
}

/// Routes the pooled gradient back to the argmax rows.
pub fn max_pool_backward(cache: &PoolCache, dy: &[f64]) -> Result<Tensor> {
    let k = cache.argmax.len();
    if dy.len() != k {
        return Err(NnError::shape("max_pool_backward", &[k], &[dy.len()]));
    }
    let mut dx = Tensor::zeros(&[cache.rows, k]);
    for (j, (&i, &g)) in cache.argmax.iter().zip(dy).enumerate() {
        dx.data_mut()[i * k + j] += g;
    }
    Ok(dx)
}
