use pcgen_core::{LabeledPointCloud, PointCloudSet};

use crate::chamfer::chamfer;
use crate::error::{MetricsError, Result};

/// Mean intersection-over-union over the parts present in `truth`.
pub fn miou(pred: &[u16], truth: &[u16], parts: usize) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(MetricsError::LengthMismatch(pred.len(), truth.len()));
    }
    if let Some(&l) = pred.iter().chain(truth).find(|&&l| l as usize >= parts) {
        return Err(MetricsError::LabelOutOfRange { label: l as usize, parts });
    }
    let mut inter = vec![0usize; parts];
    let mut union = vec![0usize; parts];
    let mut in_truth = vec![false; parts];
    for (&p, &t) in pred.iter().zip(truth) {
        in_truth[t as usize] = true;
        if p == t {
            inter[t as usize] += 1;
            union[t as usize] += 1;
        } else {
            union[t as usize] += 1;
            union[p as usize] += 1;
        }
    }
    let present: Vec<usize> = (0..parts).filter(|&p| in_truth[p]).collect();
    if present.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let total: f64 = present.iter().map(|&p| inter[p] as f64 / union[p] as f64).sum();
    Ok(total / present.len() as f64)
}

/// Labels of `cloud`'s points copied from their nearest points in `reference`.
fn transfer_labels(cloud: &LabeledPointCloud, reference: &LabeledPointCloud) -> Vec<u16> {
    let dim = cloud.dim();
    (0..cloud.len())
        .map(|i| {
            let p = cloud.point(i);
            let mut best = (f64::INFINITY, 0usize);
            for j in 0..reference.len() {
                let q = reference.point(j);
                let d: f64 = (0..dim).map(|k| (p[k] - q[k]) * (p[k] - q[k])).sum();
                if d < best.0 {
                    best = (d, j);
                }
            }
            reference.labels()[best.1]
        })
        .collect()
}

/// Label plausibility of generated clouds without ground truth: each
/// generated cloud is matched to its Chamfer-nearest real cloud, that cloud's
/// labels are transferred point-by-point, and the mIoU of the generated
/// labels against the transferred ones is averaged over `generated`.
pub fn label_transfer_miou(generated: &PointCloudSet, real: &PointCloudSet) -> Result<f64> {
    if generated.is_empty() || real.is_empty() {
        return Err(MetricsError::DegenerateSet("label transfer needs non-empty sets".into()));
    }
    if generated.vocab().len() != real.vocab().len() {
        return Err(MetricsError::VocabMismatch(generated.vocab().len(), real.vocab().len()));
    }
    let parts = real.vocab().len();
    let mut total = 0.0;
    for g in generated {
        let mut best = (f64::INFINITY, 0usize);
        for (j, r) in real.iter().enumerate() {
            let d = chamfer(g.points(), r.points(), g.dim())?;
            if d < best.0 {
                best = (d, j);
            }
        }
        let transferred = transfer_labels(g, &real.clouds()[best.1]);
        total += miou(g.labels(), &transferred, parts)?;
    }
    Ok(total / generated.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_and_inverted() {
        assert_eq!(miou(&[0, 1, 1, 0], &[0, 1, 1, 0], 2).unwrap(), 1.0);
        assert_eq!(miou(&[1, 0, 0, 1], &[0, 1, 1, 0], 2).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(miou(&[0], &[0, 1], 2), Err(MetricsError::LengthMismatch(1, 2))));
        assert!(matches!(miou(&[3], &[0], 2), Err(MetricsError::LabelOutOfRange { label: 3, parts: 2 })));
    }

    #[test]
    fn matches_set_arithmetic() {
        use std::collections::BTreeSet;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let c = rng.random_range(1..5);
            let pred: Vec<u16> = (0..10).map(|_| rng.random_range(0..c) as u16).collect();
            let truth: Vec<u16> = (0..10).map(|_| rng.random_range(0..c) as u16).collect();
            let parts: BTreeSet<u16> = truth.iter().copied().collect();
            let mut acc = 0.0;
            for &p in &parts {
                let a: BTreeSet<usize> = (0..10).filter(|&i| pred[i] == p).collect();
                let b: BTreeSet<usize> = (0..10).filter(|&i| truth[i] == p).collect();
                acc += a.intersection(&b).count() as f64 / a.union(&b).count() as f64;
            }
            let want = acc / parts.len() as f64;
            assert!((miou(&pred, &truth, c).unwrap() - want).abs() < 1e-15);
        }
    }
}
