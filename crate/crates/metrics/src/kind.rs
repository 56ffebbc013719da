use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::MetricsError;

/// Which cloud-to-cloud distance fills a [`crate::DistanceMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceKind {
    /// Chamfer distance on all points, labels ignored.
    Cd,
    /// Exact earth mover's distance, labels ignored.
    Emd,
    /// Part-aware Chamfer distance.
    Pcd,
    /// Chamfer distance restricted to one part.
    PartCd(u16),
}

impl DistanceKind {
    pub fn needs_labels(self) -> bool {
        matches!(self, DistanceKind::Pcd | DistanceKind::PartCd(_))
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceKind::Cd => f.write_str("cd"),
            DistanceKind::Emd => f.write_str("emd"),
            DistanceKind::Pcd => f.write_str("pcd"),
            DistanceKind::PartCd(p) => write!(f, "part_cd:{p}"),
        }
    }
}

impl FromStr for DistanceKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cd" => Ok(DistanceKind::Cd),
            "emd" => Ok(DistanceKind::Emd),
            "pcd" => Ok(DistanceKind::Pcd),
            _ => s
                .strip_prefix("part_cd:")
                .and_then(|p| p.parse().ok())
                .map(DistanceKind::PartCd)
                .ok_or_else(|| MetricsError::Malformed(format!("unknown distance kind {s:?}"))),
        }
    }
}

impl Serialize for DistanceKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DistanceKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
