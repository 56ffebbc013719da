use pcgen_core::{LabeledPointCloud, PointCloudSet};

use crate::error::{MetricsError, Result};
use crate::kind::DistanceKind;
use crate::matrix::{distance_matrix, self_distance_matrix, MatrixOptions};
use crate::set_metrics::{coverage, mmd, one_nna, SetMetric};

/// The `part` sub-clouds of every cloud containing that part, in set order.
/// Clouds lacking the part are skipped.
pub fn part_subsets(set: &PointCloudSet, part: u16) -> PointCloudSet {
    let clouds: Vec<LabeledPointCloud> = set
        .iter()
        .filter(|c| c.has_part(part))
        .map(|c| {
            let pts = c.part_points(part);
            let n = pts.len() / c.dim();
            LabeledPointCloud::new(pts, c.dim(), vec![part; n], c.parts()).expect("subset of a valid cloud")
        })
        .collect();
    PointCloudSet::new(format!("{}[part {part}]", set.name()), set.vocab().clone(), clouds)
        .expect("same vocabulary as the source set")
}

/// A set metric computed on each part's sub-clouds under per-part Chamfer
/// distance, then averaged over parts.
///
/// Parts absent from both sets are skipped. A part present in one set but
/// absent from every cloud of the other is an error.
pub fn part_averaged_metric(
    metric: SetMetric,
    real: &PointCloudSet,
    generated: &PointCloudSet,
    opts: MatrixOptions,
) -> Result<f64> {
    if real.vocab().len() != generated.vocab().len() {
        return Err(MetricsError::VocabMismatch(real.vocab().len(), generated.vocab().len()));
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for part in 0..real.vocab().len() as u16 {
        let rp = part_subsets(real, part);
        let gp = part_subsets(generated, part);
        match (rp.is_empty(), gp.is_empty()) {
            (true, true) => continue,
            (false, true) => {
                return Err(MetricsError::PartUniversallyAbsent {
                    part,
                    present: real.name().into(),
                    absent: generated.name().into(),
                })
            }
            (true, false) => {
                return Err(MetricsError::PartUniversallyAbsent {
                    part,
                    present: generated.name().into(),
                    absent: real.name().into(),
                })
            }
            (false, false) => {}
        }
        let relabel = |mut m: crate::DistanceMatrix| {
            m.kind = DistanceKind::PartCd(part);
            m
        };
        let value = match metric {
            SetMetric::OneNna => {
                let rr = relabel(self_distance_matrix(&rp, DistanceKind::Cd, opts)?);
                let rg = relabel(distance_matrix(&rp, &gp, DistanceKind::Cd, opts)?);
                let gg = relabel(self_distance_matrix(&gp, DistanceKind::Cd, opts)?);
                one_nna(&rr, &rg, &gg)?
            }
            SetMetric::Cov => coverage(&relabel(distance_matrix(&gp, &rp, DistanceKind::Cd, opts)?))?,
            SetMetric::Mmd => mmd(&relabel(distance_matrix(&gp, &rp, DistanceKind::Cd, opts)?))?,
        };
        total += value;
        counted += 1;
    }
    if counted == 0 {
        return Err(MetricsError::DegenerateSet("no part is present in either set".into()));
    }
    Ok(total / counted as f64)
}
