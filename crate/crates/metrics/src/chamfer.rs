use pcgen_core::LabeledPointCloud;

use crate::error::{MetricsError, Result};

/// Fills `row[i]` with the smallest squared distance from `a[i]` to `b` and
/// `col[j]` with the smallest squared distance from `b[j]` to `a`.
fn nearest_sq<const D: usize>(a: &[f64], b: &[f64], row: &mut [f64], col: &mut [f64]) {
    col.fill(f64::INFINITY);
    for (pa, best_out) in a.chunks_exact(D).zip(row.iter_mut()) {
        let mut best = f64::INFINITY;
        for (pb, c) in b.chunks_exact(D).zip(col.iter_mut()) {
            let mut s = 0.0;
            for k in 0..D {
                let t = pa[k] - pb[k];
                s += t * t;
            }
            best = best.min(s);
            *c = c.min(s);
        }
        *best_out = best;
    }
}

fn nearest_sq_dyn(a: &[f64], b: &[f64], dim: usize, row: &mut [f64], col: &mut [f64]) {
    match dim {
        2 => nearest_sq::<2>(a, b, row, col),
        3 => nearest_sq::<3>(a, b, row, col),
        1 => nearest_sq::<1>(a, b, row, col),
        _ => {
            col.fill(f64::INFINITY);
            for (pa, best_out) in a.chunks_exact(dim).zip(row.iter_mut()) {
                let mut best = f64::INFINITY;
                for (pb, c) in b.chunks_exact(dim).zip(col.iter_mut()) {
                    let s: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
                    best = best.min(s);
                    *c = c.min(s);
                }
                *best_out = best;
            }
        }
    }
}

/// Chamfer distance between two row-major point arrays of dimension `dim`:
/// the mean squared nearest-neighbour distance from `a` to `b` plus the same
/// from `b` to `a`.
///
/// Both sums run in index order, so the result is exactly symmetric.
pub fn chamfer(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    if dim == 0 || a.len() % dim != 0 || b.len() % dim != 0 {
        return Err(MetricsError::DimMismatch(a.len(), b.len()));
    }
    let (na, nb) = (a.len() / dim, b.len() / dim);
    if na == 0 || nb == 0 {
        return Err(MetricsError::EmptyInput);
    }
    let mut row = vec![0.0; na];
    let mut col = vec![0.0; nb];
    nearest_sq_dyn(a, b, dim, &mut row, &mut col);
    let sa: f64 = row.iter().sum();
    let sb: f64 = col.iter().sum();
    Ok(sa / na as f64 + sb / nb as f64)
}

/// A cloud's points grouped by part label, prepared once for repeated
/// part-aware comparisons.
#[derive(Debug, Clone)]
pub struct PartSplit {
    dim: usize,
    parts: Vec<Vec<f64>>,
    present: Vec<u16>,
}

impl PartSplit {
    pub fn new(cloud: &LabeledPointCloud) -> Self {
        let dim = cloud.dim();
        let mut parts = vec![Vec::new(); cloud.parts()];
        for (i, &l) in cloud.labels().iter().enumerate() {
            parts[l as usize].extend_from_slice(cloud.point(i));
        }
        let present = cloud.part_set();
        Self { dim, parts, present }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.parts.len()
    }

    pub fn present(&self) -> &[u16] {
        &self.present
    }

    /// Points of `part`, empty when the part is absent.
    pub fn part(&self, part: u16) -> &[f64] {
        &self.parts[part as usize]
    }

    /// Part-aware Chamfer distance to `other`; `+∞` when the present part
    /// sets differ.
    pub fn pcd(&self, other: &PartSplit) -> Result<f64> {
        if self.vocab_len() != other.vocab_len() {
            return Err(MetricsError::VocabMismatch(self.vocab_len(), other.vocab_len()));
        }
        if self.dim != other.dim {
            return Err(MetricsError::DimMismatch(self.dim, other.dim));
        }
        if self.present != other.present {
            return Ok(f64::INFINITY);
        }
        let mut total = 0.0;
        for &p in &self.present {
            total += chamfer(self.part(p), other.part(p), self.dim)?;
        }
        Ok(total)
    }

    /// Chamfer distance between the `part` subsets of both clouds.
    pub fn part_cd(&self, other: &PartSplit, part: u16) -> Result<f64> {
        if self.vocab_len() != other.vocab_len() {
            return Err(MetricsError::VocabMismatch(self.vocab_len(), other.vocab_len()));
        }
        if part as usize >= self.vocab_len() {
            return Err(MetricsError::LabelOutOfRange { label: part as usize, parts: self.vocab_len() });
        }
        let (a, b) = (self.part(part), other.part(part));
        if a.is_empty() || b.is_empty() {
            return Err(MetricsError::PartMissing(part));
        }
        chamfer(a, b, self.dim)
    }
}

/// Sum over shared parts of the per-part Chamfer distance, or `+∞` when the
/// two clouds do not contain exactly the same parts.
pub fn part_aware_chamfer(x1: &LabeledPointCloud, x2: &LabeledPointCloud) -> Result<f64> {
    if x1.parts() != x2.parts() {
        return Err(MetricsError::VocabMismatch(x1.parts(), x2.parts()));
    }
    PartSplit::new(x1).pcd(&PartSplit::new(x2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: explicit double loop, one direction at a time.
    fn brute_chamfer(a: &[f64], b: &[f64], dim: usize) -> f64 {
        let one_way = |x: &[f64], y: &[f64]| {
            let mut total = 0.0;
            for p in x.chunks(dim) {
                let mut best = f64::MAX;
                for q in y.chunks(dim) {
                    let d2: f64 = (0..dim).map(|k| (p[k] - q[k]).powi(2)).sum();
                    if d2 < best {
                        best = d2;
                    }
                }
                total += best;
            }
            total / (x.len() / dim) as f64
        };
        one_way(a, b) + one_way(b, a)
    }

    #[test]
    fn single_points() {
        assert_eq!(chamfer(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 3).unwrap(), 2.0);
    }

    #[test]
    fn identical_is_zero() {
        let a = [0.1, 0.2, 0.3, -1.0, 2.0, 0.5];
        assert_eq!(chamfer(&a, &a, 3).unwrap(), 0.0);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(chamfer(&[], &[1.0, 2.0], 2), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn pcd_infinite_on_part_mismatch() {
        let a = LabeledPointCloud::new(vec![0.0, 0.0, 1.0, 1.0], 2, vec![0, 1], 2).unwrap();
        let b = LabeledPointCloud::new(vec![0.0, 0.0, 1.0, 1.0], 2, vec![0, 0], 2).unwrap();
        assert_eq!(part_aware_chamfer(&a, &b).unwrap(), f64::INFINITY);
        assert_eq!(part_aware_chamfer(&a, &a).unwrap(), 0.0);
        let c = LabeledPointCloud::new(vec![0.0, 0.0], 2, vec![0], 3).unwrap();
        assert!(matches!(part_aware_chamfer(&a, &c), Err(MetricsError::VocabMismatch(2, 3))));
    }

    fn points(dim: usize, max_n: usize) -> impl Strategy<Value = Vec<f64>> {
        (1..max_n).prop_flat_map(move |n| prop::collection::vec(-3.0f64..3.0, n * dim))
    }

    proptest! {
        #[test]
        fn matches_oracle_and_is_symmetric(dim in 2usize..=3, seed_a in points(3, 25), seed_b in points(3, 25)) {
            let a = &seed_a[..seed_a.len() / 3 * dim];
            let b = &seed_b[..seed_b.len() / 3 * dim];
            prop_assume!(!a.is_empty() && !b.is_empty());
            let got = chamfer(a, b, dim).unwrap();
            prop_assert!((got - brute_chamfer(a, b, dim)).abs() <= 1e-12);
            prop_assert_eq!(got, chamfer(b, a, dim).unwrap());
        }
    }
}
