use crate::error::{MetricsError, Result};

/// Default bound on points per cloud for [`emd_exact`]; the solver is `O(n³)`.
pub const DEFAULT_EMD_CAP: usize = 256;

/// Minimum-cost perfect matching on a dense square cost matrix (row-major).
///
/// Shortest augmenting path Hungarian method with row/column potentials.
/// Returns `assignment[row] = column`.
pub fn solve_assignment(costs: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(costs.len(), n * n, "cost matrix must be n×n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based with a virtual column 0, following the classic formulation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &costs[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Exact earth mover's distance between equal-size clouds: the minimum over
/// one-to-one matchings of the mean Euclidean distance between matched points.
pub fn emd_exact(a: &[f64], b: &[f64], dim: usize, cap: usize) -> Result<f64> {
    if dim == 0 || a.len() % dim != 0 || b.len() % dim != 0 {
        return Err(MetricsError::DimMismatch(a.len(), b.len()));
    }
    let (na, nb) = (a.len() / dim, b.len() / dim);
    if na == 0 || nb == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if na != nb {
        return Err(MetricsError::SizeMismatch(na, nb));
    }
    if na > cap {
        return Err(MetricsError::TooLarge { n: na, cap });
    }
    let n = na;
    let dist = |i: usize, j: usize| -> f64 {
        let (p, q) = (&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
        p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut costs = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            costs.push(dist(i, j));
        }
    }
    let assignment = solve_assignment(&costs, n);
    // Summing the matched costs in sorted order makes the value independent
    // of which side was treated as rows.
    let mut matched: Vec<f64> = assignment.iter().enumerate().map(|(i, &j)| costs[i * n + j]).collect();
    matched.sort_by(f64::total_cmp);
    Ok(matched.iter().sum::<f64>() / n as f64)
}
