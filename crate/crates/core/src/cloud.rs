use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Largest vocabulary representable by the `u16` labels of the binary format.
pub const MAX_PARTS: usize = u16::MAX as usize + 1;

/// Ordered, unique part names shared by every cloud in a set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartVocabulary {
    names: Vec<String>,
}

impl PartVocabulary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(CoreError::InvalidVocabulary("at least one part is required".into()));
        }
        if names.len() > MAX_PARTS {
            return Err(CoreError::InvalidVocabulary(format!(
                "{} parts exceeds the maximum of {MAX_PARTS}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() {
                return Err(CoreError::InvalidVocabulary("empty part name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(CoreError::InvalidVocabulary(format!("duplicate part name {name:?}")));
            }
        }
        Ok(Self { names })
    }

    /// Vocabulary with placeholder names `part0..part{c-1}`.
    pub fn anonymous(parts: usize) -> Result<Self> {
        Self::new((0..parts).map(|p| format!("part{p}")).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// `n` points in `d` dimensions, each carrying a part label in `[0, parts)`.
///
/// Coordinates are stored row-major. Construction validates every invariant,
/// so a value of this type is always well formed.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    points: Vec<f64>,
    labels: Vec<u16>,
    dim: usize,
    parts: usize,
}

impl LabeledPointCloud {
    pub fn new(points: Vec<f64>, dim: usize, labels: Vec<u16>, parts: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(CoreError::InvalidCloud(format!("dimension must be 2 or 3, got {dim}")));
        }
        if parts == 0 || parts > MAX_PARTS {
            return Err(CoreError::InvalidCloud(format!("invalid part count {parts}")));
        }
        if labels.is_empty() {
            return Err(CoreError::InvalidCloud("a cloud needs at least one point".into()));
        }
        if points.len() != labels.len() * dim {
            return Err(CoreError::InvalidCloud(format!(
                "{} coordinates do not match {} points of dimension {dim}",
                points.len(),
                labels.len()
            )));
        }
        if let Some(i) = points.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidCloud(format!("non-finite coordinate at point {}", i / dim)));
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= parts) {
            return Err(CoreError::InvalidCloud(format!(
                "label {l} of point {i} out of range for {parts} parts"
            )));
        }
        Ok(Self { points, labels, dim, parts })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Size of the vocabulary this cloud's labels index into.
    pub fn parts(&self) -> usize {
        self.parts
    }

    /// Row-major `n × d` coordinates.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Distinct labels present in this cloud, ascending.
    pub fn part_set(&self) -> Vec<u16> {
        let mut present = vec![false; self.parts];
        for &l in &self.labels {
            present[l as usize] = true;
        }
        present
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(|(i, _)| i as u16)
            .collect()
    }

    pub fn has_part(&self, part: u16) -> bool {
        self.labels.contains(&part)
    }

    /// Indices of the points labeled `part`, ascending.
    pub fn part_indices(&self, part: u16) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == part)
            .map(|(i, _)| i)
            .collect()
    }

    /// Row-major coordinates of the points labeled `part`, in point order.
    pub fn part_points(&self, part: u16) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, &l) in self.labels.iter().enumerate() {
            if l == part {
                out.extend_from_slice(self.point(i));
            }
        }
        out
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<u16>, usize, usize) {
        (self.points, self.labels, self.dim, self.parts)
    }
}

/// An ordered collection of clouds sharing one vocabulary.
///
/// The order of `clouds` is the canonical iteration order for every
/// deterministic reduction over the set.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudSet {
    name: String,
    vocab: PartVocabulary,
    clouds: Vec<LabeledPointCloud>,
}

impl PointCloudSet {
    pub fn new(name: impl Into<String>, vocab: PartVocabulary, clouds: Vec<LabeledPointCloud>) -> Result<Self> {
        let name = name.into();
        for (i, cloud) in clouds.iter().enumerate() {
            if cloud.parts() != vocab.len() {
                return Err(CoreError::VocabMismatch {
                    expected: vocab.len(),
                    found: cloud.parts(),
                    context: format!("cloud {i} of set {name:?}"),
                });
            }
        }
        Ok(Self { name, vocab, clouds })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vocab(&self) -> &PartVocabulary {
        &self.vocab
    }

    pub fn clouds(&self) -> &[LabeledPointCloud] {
        &self.clouds
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&LabeledPointCloud> {
        self.clouds.get(i)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledPointCloud> {
        self.clouds.iter()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Subset in the order given by `indices`.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Self {
        Self {
            name: name.into(),
            vocab: self.vocab.clone(),
            clouds: indices.iter().map(|&i| self.clouds[i].clone()).collect(),
        }
    }

    pub fn into_clouds(self) -> Vec<LabeledPointCloud> {
        self.clouds
    }
}

impl<'a> IntoIterator for &'a PointCloudSet {
    type Item = &'a LabeledPointCloud;
    type IntoIter = std::slice::Iter<'a, LabeledPointCloud>;

    fn into_iter(self) -> Self::IntoIter {
        self.clouds.iter()
    }
}
