use pcgen_core::PointCloudSet;

use crate::error::{MetricsError, Result};
use crate::kind::DistanceKind;
use crate::matrix::{distance_matrix, self_distance_matrix, DistanceMatrix, MatrixOptions};
use crate::miou::label_transfer_miou;
use crate::part::part_averaged_metric;
use crate::report::{MetricName, MetricReport, MetricValue, TOOL_VERSION};
use crate::set_metrics::{coverage, mmd, one_nna, SetMetric, TIE_RULE};
use crate::snap::{snap_score, SnapOptions};

#[derive(Debug, Clone, Copy, Default)]
pub struct EvalOptions {
    pub matrix: MatrixOptions,
    pub snap: SnapOptions,
    pub seed: Option<u64>,
}

/// The three blocks behind 1-NNA/COV/MMD. `rr` and `gg` are empty (0×0)
/// when 1-NNA was not requested.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalMatrices {
    pub rr: DistanceMatrix,
    pub rg: DistanceMatrix,
    pub gg: DistanceMatrix,
}

fn report(metric: MetricName, distance: String, value: f64, r: usize, g: usize, seed: Option<u64>) -> MetricReport {
    MetricReport {
        metric,
        distance,
        value: MetricValue(value),
        r_size: r,
        g_size: g,
        tie_rule: TIE_RULE.to_string(),
        seed,
        version: TOOL_VERSION.to_string(),
    }
}

fn needs_matrices(metrics: &[MetricName]) -> bool {
    metrics.iter().any(|m| matches!(m, MetricName::OneNna | MetricName::Cov | MetricName::Mmd))
}

/// Recomputes the matrix-based metrics (1-NNA, COV, MMD) from stored blocks.
/// Other metrics in `metrics` are ignored.
pub fn evaluate_from_matrices(m: &EvalMatrices, metrics: &[MetricName], seed: Option<u64>) -> Result<Vec<MetricReport>> {
    let (nr, ng) = (m.rg.rows, m.rg.cols);
    let distance = m.rg.kind.to_string();
    let mut out = Vec::new();
    for &metric in metrics {
        let value = match metric {
            MetricName::OneNna => one_nna(&m.rr, &m.rg, &m.gg)?,
            MetricName::Cov => coverage(&m.rg.transpose())?,
            MetricName::Mmd => mmd(&m.rg.transpose())?,
            _ => continue,
        };
        out.push(report(metric, distance.clone(), value, nr, ng, seed));
    }
    Ok(out)
}

/// Evaluates `metrics` for a generated set against a real set.
///
/// 1-NNA, COV and MMD use `kind`; the `-P` variants use per-part Chamfer;
/// SNAP is the mean score over generated clouds; mIoU is
/// [`label_transfer_miou`]. Returns the reports in request order together
/// with the distance blocks when any were computed.
pub fn evaluate_sets(
    real: &PointCloudSet,
    generated: &PointCloudSet,
    kind: DistanceKind,
    metrics: &[MetricName],
    opts: EvalOptions,
) -> Result<(Vec<MetricReport>, Option<EvalMatrices>)> {
    if real.vocab().len() != generated.vocab().len() {
        return Err(MetricsError::VocabMismatch(real.vocab().len(), generated.vocab().len()));
    }
    let (nr, ng) = (real.len(), generated.len());
    let matrices = if needs_matrices(metrics) {
        let want_self = metrics.contains(&MetricName::OneNna);
        let empty = || DistanceMatrix::new(kind, 0, 0, vec![]).expect("empty matrix");
        Some(EvalMatrices {
            rr: if want_self { self_distance_matrix(real, kind, opts.matrix)? } else { empty() },
            rg: distance_matrix(real, generated, kind, opts.matrix)?,
            gg: if want_self { self_distance_matrix(generated, kind, opts.matrix)? } else { empty() },
        })
    } else {
        None
    };

    let mut out = Vec::new();
    for &metric in metrics {
        let (distance, value) = match metric {
            MetricName::OneNna | MetricName::Cov | MetricName::Mmd => {
                let m = matrices.as_ref().expect("computed above");
                let mut r = evaluate_from_matrices(m, &[metric], opts.seed)?;
                out.append(&mut r);
                continue;
            }
            MetricName::OneNnaP => ("part_cd".into(), part_averaged_metric(SetMetric::OneNna, real, generated, opts.matrix)?),
            MetricName::CovP => ("part_cd".into(), part_averaged_metric(SetMetric::Cov, real, generated, opts.matrix)?),
            MetricName::MmdP => ("part_cd".into(), part_averaged_metric(SetMetric::Mmd, real, generated, opts.matrix)?),
            MetricName::Snap => {
                if generated.is_empty() {
                    return Err(MetricsError::DegenerateSet("SNAP needs a non-empty generated set".into()));
                }
                let mut total = 0.0;
                for cloud in generated {
                    total += snap_score(cloud, opts.snap)?;
                }
                ("snap".into(), total / ng as f64)
            }
            MetricName::Miou => ("cd".into(), label_transfer_miou(generated, real)?),
        };
        out.push(report(metric, distance, value, nr, ng, opts.seed));
    }
    Ok((out, matrices))
}
