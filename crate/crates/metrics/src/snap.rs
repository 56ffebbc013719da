use pcgen_core::LabeledPointCloud;

use crate::chamfer::{chamfer, PartSplit};
use crate::error::{MetricsError, Result};

pub const DEFAULT_N_SNAP: usize = 30;
pub const DEFAULT_CONTACT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapOptions {
    /// Size of the mutually nearest subsets; clamped to each part's size.
    pub n_snap: usize,
    /// Two parts are in contact when their closest points are within
    /// `contact_delta` times the cloud's bounding-box diagonal.
    pub contact_delta: f64,
}

impl Default for SnapOptions {
    fn default() -> Self {
        Self { n_snap: DEFAULT_N_SNAP, contact_delta: DEFAULT_CONTACT_DELTA }
    }
}

fn sq_dist(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// For each point of `a`, its squared distance to the nearest point of `b`.
fn dist_to_set(a: &[f64], b: &[f64], dim: usize) -> Vec<f64> {
    a.chunks_exact(dim)
        .map(|p| b.chunks_exact(dim).map(|q| sq_dist(p, q)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// The `k` points of `a` closest to `b`; ties go to the lower index.
fn nearest_subset(a: &[f64], b: &[f64], dim: usize, k: usize) -> Vec<f64> {
    let d = dist_to_set(a, b, dim);
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let mut out = Vec::with_capacity(k * dim);
    for &i in order.iter().take(k) {
        out.extend_from_slice(&a[i * dim..(i + 1) * dim]);
    }
    out
}

fn bbox_diagonal(cloud: &LabeledPointCloud) -> f64 {
    let dim = cloud.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in cloud.points().chunks_exact(dim) {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
}

/// Connection-tightness score of one labeled cloud.
///
/// For every present part, the Chamfer distance between its `n_snap` points
/// nearest to a contacting part and that part's `n_snap` points nearest to it,
/// minimised over contacting parts and averaged over present parts. A part
/// with no contacting neighbour falls back to its globally nearest part.
pub fn snap_score(cloud: &LabeledPointCloud, opts: SnapOptions) -> Result<f64> {
    let split = PartSplit::new(cloud);
    let present = split.present().to_vec();
    if present.len() < 2 {
        return Err(MetricsError::SinglePart(present.len()));
    }
    let dim = cloud.dim();
    let threshold = opts.contact_delta * bbox_diagonal(cloud);

    // Closest-point distance between every pair of present parts.
    let m = present.len();
    let mut gap = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let d = dist_to_set(split.part(present[i]), split.part(present[j]), dim)
                .into_iter()
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            gap[i * m + j] = d;
            gap[j * m + i] = d;
        }
    }

    let mut total = 0.0;
    for i in 0..m {
        let mut contacts: Vec<usize> = (0..m).filter(|&j| j != i && gap[i * m + j] <= threshold).collect();
        if contacts.is_empty() {
            let nearest = (0..m)
                .filter(|&j| j != i)
                .min_by(|&a, &b| gap[i * m + a].total_cmp(&gap[i * m + b]).then(a.cmp(&b)))
                .expect("at least two parts");
            contacts.push(nearest);
        }
        let p1 = split.part(present[i]);
        let mut best = f64::INFINITY;
        for j in contacts {
            let p2 = split.part(present[j]);
            let k1 = opts.n_snap.min(p1.len() / dim).max(1);
            let k2 = opts.n_snap.min(p2.len() / dim).max(1);
            let a = nearest_subset(p1, p2, dim, k1);
            let b = nearest_subset(p2, p1, dim, k2);
            best = best.min(chamfer(&a, &b, dim)?);
        }
        total += best;
    }
    Ok(total / m as f64)
}
