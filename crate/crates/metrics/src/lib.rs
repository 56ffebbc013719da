//! Cloud-to-cloud distances and the set metrics built on them.
//!
//! The kernels ([`chamfer`], [`part_aware_chamfer`], [`emd_exact`],
//! [`snap_score`]) are pure functions. [`distance_matrix`] fans pairs out to a
//! worker pool but writes every entry into a fixed slot, so its output is
//! byte-identical for any thread count. The set metrics (1-NNA, COV, MMD and
//! their part-averaged variants) only read a [`DistanceMatrix`] and follow the
//! tie rules in [`TIE_RULE`].

mod chamfer;
mod emd;
mod error;
mod kind;
mod matrix;
mod miou;
mod part;
mod report;
mod set_metrics;
mod snap;

pub use chamfer::{chamfer, part_aware_chamfer, PartSplit};
pub use emd::{emd_exact, solve_assignment, DEFAULT_EMD_CAP};
pub use error::{MetricsError, Result};
pub use kind::DistanceKind;
pub use matrix::{distance_matrix, self_distance_matrix, DistanceMatrix, MatrixOptions};
pub use miou::{label_transfer_miou, miou};
pub use part::{part_averaged_metric, part_subsets};
pub use report::{format_percent, MetricName, MetricReport, MetricValue, TOOL_VERSION};
pub use set_metrics::{coverage, mmd, one_nna, SetMetric, TIE_RULE};
pub use snap::{snap_score, SnapOptions, DEFAULT_CONTACT_DELTA, DEFAULT_N_SNAP};

mod evaluate;
pub use evaluate::{evaluate_from_matrices, evaluate_sets, EvalMatrices, EvalOptions};
