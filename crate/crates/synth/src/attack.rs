use std::path::{Path, PathBuf};

use pcgen_core::{CoreError, LabeledPointCloud, PointCloudSet};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SynthError};
use crate::item_rng;

pub const DEFAULT_CONTACT_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// Parts keep their donor coordinates.
    None,
    /// Each part is translated so its contact centroid lands on the first
    /// donor's contact centroid for the same part.
    CentroidSnap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    /// Donor set location, resolved by callers that load from disk.
    #[serde(default)]
    pub donors: Option<PathBuf>,
    pub alignment: Alignment,
    #[serde(default)]
    pub seed: u64,
    pub count: usize,
    /// Draw a different donor for every part when there are enough donors.
    #[serde(default)]
    pub distinct_donors: bool,
    /// Never reuse a donor for the same part across outputs; needs
    /// `count <= donors`.
    #[serde(default)]
    pub unique_per_part: bool,
    /// Fraction of a part's points, nearest to the other parts, forming its
    /// contact region.
    #[serde(default = "default_fraction")]
    pub contact_fraction: f64,
}

fn default_fraction() -> f64 {
    DEFAULT_CONTACT_FRACTION
}

impl AttackConfig {
    pub fn new(alignment: Alignment, count: usize, seed: u64) -> Self {
        Self {
            donors: None,
            alignment,
            seed,
            count,
            distinct_donors: false,
            unique_per_part: false,
            contact_fraction: DEFAULT_CONTACT_FRACTION,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| SynthError::Json { path: path.display().to_string(), source })
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(SynthError::EmptySet);
        }
        if !(self.contact_fraction > 0.0 && self.contact_fraction <= 1.0) {
            return Err(SynthError::BadConfig(format!(
                "contact_fraction must be in (0, 1], got {}",
                self.contact_fraction
            )));
        }
        Ok(())
    }
}

/// Centroid of the `ceil(fraction * n_p)` points of `part` closest to any
/// point of another part, ties broken by point index. A cloud with no other
/// part uses the whole part. `None` when the part is absent.
pub fn contact_centroid(cloud: &LabeledPointCloud, part: u16, fraction: f64) -> Option<Vec<f64>> {
    let d = cloud.dim();
    let own = cloud.part_indices(part);
    if own.is_empty() {
        return None;
    }
    let others: Vec<usize> = (0..cloud.len()).filter(|&i| cloud.labels()[i] != part).collect();
    let chosen: Vec<usize> = if others.is_empty() {
        own
    } else {
        let mut scored: Vec<(f64, usize)> = own
            .iter()
            .map(|&i| {
                let p = cloud.point(i);
                let best = others
                    .iter()
                    .map(|&j| {
                        let q = cloud.point(j);
                        (0..d).map(|k| (p[k] - q[k]).powi(2)).sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min);
                (best, i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = ((fraction * scored.len() as f64).ceil() as usize).clamp(1, scored.len());
        scored[..k].iter().map(|&(_, i)| i).collect()
    };
    let mut c = vec![0.0; d];
    for &i in &chosen {
        for (ck, v) in c.iter_mut().zip(cloud.point(i)) {
            *ck += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= chosen.len() as f64);
    Some(c)
}

/// Builds `config.count` clouds, each assembling every part from a randomly
/// chosen donor. Part `p` of the output keeps the point count and point order
/// of its donor's part `p`.
pub fn recombine_attack(donors: &PointCloudSet, config: &AttackConfig) -> Result<PointCloudSet> {
    config.validate()?;
    if donors.is_empty() {
        return Err(SynthError::InsufficientDonors(0));
    }
    let parts = donors.vocab().len();
    for (i, cloud) in donors.iter().enumerate() {
        for p in 0..parts as u16 {
            if !cloud.has_part(p) {
                return Err(SynthError::MissingPart { donor: i, part: p });
            }
        }
    }
    let centroids: Vec<Vec<Vec<f64>>> = if config.alignment == Alignment::CentroidSnap {
        donors
            .iter()
            .map(|c| (0..parts as u16).map(|p| contact_centroid(c, p, config.contact_fraction).unwrap()).collect())
            .collect()
    } else {
        Vec::new()
    };

    let n = donors.len();
    if config.unique_per_part && config.count > n {
        return Err(SynthError::BadConfig(format!(
            "unique_per_part needs count <= donors, got {} > {n}",
            config.count
        )));
    }
    if config.unique_per_part && config.distinct_donors {
        return Err(SynthError::BadConfig("unique_per_part and distinct_donors are exclusive".into()));
    }
    // One donor permutation per part, drawn from a stream past the per-output ones.
    let perms: Vec<Vec<usize>> = if config.unique_per_part {
        let mut rng = item_rng(config.seed, u64::MAX);
        (0..parts)
            .map(|_| {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                perm
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut clouds = Vec::with_capacity(config.count);
    for i in 0..config.count {
        let mut rng = item_rng(config.seed, i as u64);
        let choice: Vec<usize> = if config.unique_per_part {
            perms.iter().map(|perm| perm[i]).collect()
        } else if config.distinct_donors && n >= parts {
            let mut pool: Vec<usize> = (0..n).collect();
            (0..parts)
                .map(|p| {
                    let j = rng.random_range(p..n);
                    pool.swap(p, j);
                    pool[p]
                })
                .collect()
        } else {
            (0..parts).map(|_| rng.random_range(0..n)).collect()
        };

        let first = choice[0];
        let dim = donors.clouds()[first].dim();
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (p, &donor) in choice.iter().enumerate() {
            let src = donors.clouds()[donor].part_points(p as u16);
            let shift: Vec<f64> = if config.alignment == Alignment::CentroidSnap {
                centroids[first][p].iter().zip(&centroids[donor][p]).map(|(a, b)| a - b).collect()
            } else {
                vec![0.0; dim]
            };
            for pt in src.chunks(dim) {
                points.extend(pt.iter().zip(&shift).map(|(v, s)| v + s));
            }
            labels.extend(std::iter::repeat_n(p as u16, src.len() / dim));
        }
        clouds.push(LabeledPointCloud::new(points, dim, labels, parts)?);
    }
    let tag = match config.alignment {
        Alignment::None => "none",
        Alignment::CentroidSnap => "centroid-snap",
    };
    Ok(PointCloudSet::new(format!("attack-{tag}-s{}", config.seed), donors.vocab().clone(), clouds)?)
}
