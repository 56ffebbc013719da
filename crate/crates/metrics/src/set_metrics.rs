use crate::error::{MetricsError, Result};
use crate::matrix::DistanceMatrix;

/// Tie rules shared by every set metric; recorded in each report.
pub const TIE_RULE: &str =
    "1-NNA: nearest-neighbour ties prefer the opposite set, then the lower index; COV: argmin ties take the lower index";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetMetric {
    OneNna,
    Cov,
    Mmd,
}

fn check_shape(m: &DistanceMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.rows != rows || m.cols != cols {
        return Err(MetricsError::Shape(format!(
            "{what} is {}×{}, expected {rows}×{cols}",
            m.rows, m.cols
        )));
    }
    Ok(())
}

/// Whether the nearest neighbour of a sample lies in its own set.
///
/// `own` holds distances to the sample's own set (with `self_index`
/// excluded), `other` distances to the opposite set.
fn nearest_is_own(own: &[f64], self_index: usize, other: &[f64]) -> bool {
    // Key: (distance, same-set flag, index); opposite set wins ties.
    let mut best = (f64::INFINITY, true, usize::MAX);
    let mut consider = |d: f64, same: bool, idx: usize| {
        let better = match d.total_cmp(&best.0) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => (same, idx) < (best.1, best.2),
        };
        if better {
            best = (d, same, idx);
        }
    };
    for (j, &d) in other.iter().enumerate() {
        consider(d, false, j);
    }
    for (j, &d) in own.iter().enumerate() {
        if j != self_index {
            consider(d, true, j);
        }
    }
    best.1
}

/// 1-nearest-neighbour accuracy of the two-sample test between R and G.
///
/// `d_rr` is |R|×|R|, `d_rg` is |R|×|G| and `d_gg` is |G|×|G|.
pub fn one_nna(d_rr: &DistanceMatrix, d_rg: &DistanceMatrix, d_gg: &DistanceMatrix) -> Result<f64> {
    let (nr, ng) = (d_rr.rows, d_gg.rows);
    if nr < 2 || ng < 2 {
        return Err(MetricsError::DegenerateSet(format!("1-NNA needs at least 2 samples per set, got {nr} and {ng}")));
    }
    check_shape(d_rr, nr, nr, "D_rr")?;
    check_shape(d_gg, ng, ng, "D_gg")?;
    check_shape(d_rg, nr, ng, "D_rg")?;
    let mut same = 0usize;
    for i in 0..nr {
        if nearest_is_own(d_rr.row(i), i, d_rg.row(i)) {
            same += 1;
        }
    }
    let d_gr = d_rg.transpose();
    for i in 0..ng {
        if nearest_is_own(d_gg.row(i), i, d_gr.row(i)) {
            same += 1;
        }
    }
    Ok(same as f64 / (nr + ng) as f64)
}

fn argmin_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v.total_cmp(&row[best]).is_lt() {
            best = j;
        }
    }
    best
}

/// Fraction of R that is the nearest real neighbour of some generated cloud.
/// `d_gr` is |G|×|R|.
pub fn coverage(d_gr: &DistanceMatrix) -> Result<f64> {
    if d_gr.rows == 0 || d_gr.cols == 0 {
        return Err(MetricsError::DegenerateSet("COV needs non-empty sets".into()));
    }
    let mut hit = vec![false; d_gr.cols];
    for g in 0..d_gr.rows {
        hit[argmin_lowest(d_gr.row(g))] = true;
    }
    Ok(hit.iter().filter(|&&h| h).count() as f64 / d_gr.cols as f64)
}

/// Mean over real clouds of the distance to their nearest generated cloud.
/// `d_gr` is |G|×|R|; infinite minima propagate to an infinite result.
pub fn mmd(d_gr: &DistanceMatrix) -> Result<f64> {
    if d_gr.rows == 0 || d_gr.cols == 0 {
        return Err(MetricsError::DegenerateSet("MMD needs non-empty sets".into()));
    }
    let mut total = 0.0;
    for r in 0..d_gr.cols {
        let mut best = f64::INFINITY;
        for g in 0..d_gr.rows {
            best = best.min(d_gr.get(g, r));
        }
        total += best;
    }
    Ok(total / d_gr.cols as f64)
}
