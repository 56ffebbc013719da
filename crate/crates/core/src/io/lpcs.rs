use std::path::Path;

use crate::cloud::{LabeledPointCloud, MAX_PARTS};
use crate::error::{CoreError, Result};

pub const LPCS_MAGIC: &[u8; 4] = b"LPCS";
pub const LPCS_VERSION: u32 = 1;

/// Encodes clouds as `.lpcs`. Coordinates are narrowed to `f32`.
///
/// All clouds must share `d` and the part count.
pub fn encode_lpcs(clouds: &[LabeledPointCloud]) -> Result<Vec<u8>> {
    let first = clouds
        .first()
        .ok_or_else(|| CoreError::EmptySet("cannot encode zero clouds".into()))?;
    let (d, parts) = (first.dim(), first.parts());
    let mut out = Vec::new();
    out.extend_from_slice(LPCS_MAGIC);
    for v in [LPCS_VERSION, clouds.len() as u32, d as u32, parts as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (i, cloud) in clouds.iter().enumerate() {
        if cloud.dim() != d {
            return Err(CoreError::InvalidCloud(format!("cloud {i} has d={} but the set has d={d}", cloud.dim())));
        }
        if cloud.parts() != parts {
            return Err(CoreError::VocabMismatch {
                expected: parts,
                found: cloud.parts(),
                context: format!("cloud {i}"),
            });
        }
        let narrowed_ok = cloud.points().iter().all(|&v| (v as f32).is_finite());
        if !narrowed_ok {
            return Err(CoreError::InvalidCloud(format!("cloud {i} has coordinates outside f32 range")));
        }
        out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
        for &v in cloud.points() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &l in cloud.labels() {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> CoreError {
        CoreError::MalformedBinary { path: self.path.to_path_buf(), reason: reason.into() }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.err(format!("truncated at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decodes `.lpcs` bytes into `(d, parts, clouds)`.
pub fn decode_lpcs(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<LabeledPointCloud>)> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != LPCS_MAGIC {
        return Err(r.err("bad magic"));
    }
    let version = r.u32()?;
    if version != LPCS_VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let d = r.u32()? as usize;
    let parts = r.u32()? as usize;
    if !(d == 2 || d == 3) {
        return Err(r.err(format!("d must be 2 or 3, got {d}")));
    }
    if parts == 0 || parts > MAX_PARTS {
        return Err(r.err(format!("invalid part count {parts}")));
    }
    let mut clouds = Vec::with_capacity(count.min(1 << 16));
    for ci in 0..count {
        let n = r.u32()? as usize;
        if n == 0 {
            return Err(r.err(format!("cloud {ci} has no points")));
        }
        let coord_bytes = r.take(n.checked_mul(d * 4).ok_or_else(|| r.err("size overflow"))?)?;
        let mut points = Vec::with_capacity(n * d);
        for chunk in coord_bytes.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(r.err(format!("cloud {ci} has a non-finite coordinate")));
            }
            points.push(v as f64);
        }
        let label_bytes = r.take(n * 2)?;
        let mut labels = Vec::with_capacity(n);
        for chunk in label_bytes.chunks_exact(2) {
            let l = u16::from_le_bytes(chunk.try_into().unwrap());
            if l as usize >= parts {
                return Err(r.err(format!("cloud {ci} has label {l} out of range for {parts} parts")));
            }
            labels.push(l);
        }
        clouds.push(LabeledPointCloud::new(points, d, labels, parts)?);
    }
    if r.pos != bytes.len() {
        return Err(r.err(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((d, parts, clouds))
}

pub fn read_lpcs(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<LabeledPointCloud>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode_lpcs(&bytes, path)
}

pub fn write_lpcs(clouds: &[LabeledPointCloud], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_lpcs(clouds)?;
    std::fs::write(path, bytes).map_err(|e| CoreError::io(path, e))
}
