use std::path::{Path, PathBuf};

use crate::cloud::{LabeledPointCloud, PartVocabulary, PointCloudSet};
use crate::error::{CoreError, Result};
use crate::manifest::{ManifestEntry, SetManifest, MANIFEST_FILE, MANIFEST_VERSION};

use super::{read_lpc, read_lpcs, write_lpc, write_lpcs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SetFormat {
    /// One `.lpc` file per cloud; bit-exact.
    #[default]
    Text,
    /// A single `.lpcs` file; coordinates narrowed to `f32`.
    Binary,
}

fn is_cloud_file(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("lpc") | Some("lpcs"))
}

/// Reads every cloud of one file, returning `(parts, clouds)`.
fn read_cloud_file(path: &Path) -> Result<(usize, Vec<LabeledPointCloud>)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("lpc") => {
            let c = read_lpc(path)?;
            Ok((c.parts(), vec![c]))
        }
        Some("lpcs") => {
            let (_, parts, clouds) = read_lpcs(path)?;
            Ok((parts, clouds))
        }
        _ => Err(CoreError::Manifest(format!("{}: not a .lpc or .lpcs file", path.display()))),
    }
}

fn sort_lexicographic(paths: &mut [PathBuf]) {
    paths.sort_by(|a, b| a.as_os_str().cmp(b.as_os_str()));
}

fn read_from_manifest(manifest_path: &Path) -> Result<PointCloudSet> {
    let manifest = SetManifest::load(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let vocab = PartVocabulary::new(manifest.part_names.clone())?;
    let mut entries = manifest.files.clone();
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let mut clouds = Vec::new();
    for entry in &entries {
        let path = root.join(&entry.path);
        let (parts, mut found) = read_cloud_file(&path)?;
        if parts != vocab.len() {
            return Err(CoreError::VocabMismatch {
                expected: vocab.len(),
                found: parts,
                context: path.display().to_string(),
            });
        }
        if found.len() != entry.count {
            return Err(CoreError::Manifest(format!(
                "{}: manifest declares {} clouds, file holds {}",
                path.display(),
                entry.count,
                found.len()
            )));
        }
        clouds.append(&mut found);
    }
    if clouds.is_empty() {
        return Err(CoreError::EmptySet(manifest_path.display().to_string()));
    }
    PointCloudSet::new(manifest.name, vocab, clouds)
}

fn read_from_files(name: String, files: &[PathBuf], context: &Path) -> Result<PointCloudSet> {
    let mut parts_seen: Option<usize> = None;
    let mut clouds = Vec::new();
    for path in files {
        let (parts, mut found) = read_cloud_file(path)?;
        match parts_seen {
            None => parts_seen = Some(parts),
            Some(expected) if expected != parts => {
                return Err(CoreError::VocabMismatch {
                    expected,
                    found: parts,
                    context: path.display().to_string(),
                })
            }
            Some(_) => {}
        }
        clouds.append(&mut found);
    }
    let parts = match parts_seen {
        Some(p) if !clouds.is_empty() => p,
        _ => return Err(CoreError::EmptySet(context.display().to_string())),
    };
    PointCloudSet::new(name, PartVocabulary::anonymous(parts)?, clouds)
}

/// Reads a set from a manifest, a directory, or a single cloud file.
///
/// Clouds are ordered by lexicographic file path, then by position within
/// each file. A directory containing `manifest.json` is read through it;
/// otherwise every `.lpc`/`.lpcs` file in it is loaded with placeholder part
/// names.
pub fn read_set(path: impl AsRef<Path>) -> Result<PointCloudSet> {
    let path = path.as_ref();
    if path.is_dir() {
        let manifest = path.join(MANIFEST_FILE);
        if manifest.is_file() {
            return read_from_manifest(&manifest);
        }
        let mut files = Vec::new();
        for entry in std::fs::read_dir(path).map_err(|e| CoreError::io(path, e))? {
            let entry = entry.map_err(|e| CoreError::io(path, e))?;
            let p = entry.path();
            if p.is_file() && is_cloud_file(&p) {
                files.push(p);
            }
        }
        sort_lexicographic(&mut files);
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "set".into());
        return read_from_files(name, &files, path);
    }
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        return read_from_manifest(path);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "set".into());
    read_from_files(name, &[path.to_path_buf()], path)
}

/// Writes `set` into `dir` (created if needed) together with a manifest.
pub fn write_set(set: &PointCloudSet, dir: impl AsRef<Path>, format: SetFormat) -> Result<SetManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let mut files = Vec::new();
    match format {
        SetFormat::Text => {
            for (i, cloud) in set.iter().enumerate() {
                let file = format!("cloud_{i:06}.lpc");
                write_lpc(cloud, dir.join(&file))?;
                files.push(ManifestEntry { path: file, count: 1 });
            }
        }
        SetFormat::Binary => {
            if !set.is_empty() {
                let file = "clouds.lpcs".to_string();
                write_lpcs(set.clouds(), dir.join(&file))?;
                files.push(ManifestEntry { path: file, count: set.len() });
            }
        }
    }
    let manifest = SetManifest {
        name: set.name().to_string(),
        part_names: set.vocab().names().to_vec(),
        files,
        version: MANIFEST_VERSION,
    };
    manifest.save(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
