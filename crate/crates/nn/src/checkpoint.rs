//! Named-tensor checkpoints.
//!
//! Layout, little-endian: magic `SLNK`, `u32` version, then until end of
//! input, per tensor: `u32` name length, UTF-8 name, `u32` rank, `u32` dims,
//! `f64` values.

use std::path::Path;

use crate::error::{NnError, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SLNK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for (name, t) in tensors {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(NnError::Checkpoint(format!("truncated {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut out: Vec<(String, Tensor)> = Vec::new();
    while r.pos < bytes.len() {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| NnError::Checkpoint("tensor name is not UTF-8".into()))?
            .to_string();
        if out.iter().any(|(n, _)| *n == name) {
            return Err(NnError::Checkpoint(format!("duplicate tensor {name}")));
        }
        let rank = r.u32("rank")? as usize;
        if rank == 0 || rank > 3 {
            return Err(NnError::Checkpoint(format!("tensor {name} has rank {rank}")));
        }
        let shape = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let count = count.filter(|&c| c <= (bytes.len() - r.pos) / 8).ok_or_else(|| {
            NnError::Checkpoint(format!("tensor {name} of shape {shape:?} exceeds the remaining bytes"))
        })?;
        let data = r
            .take(count * 8, "values")?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}

pub fn save_checkpoint<'a>(path: &Path, tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Result<()> {
    std::fs::write(path, encode_checkpoint(tensors))
        .map_err(|source| NnError::Io { path: path.display().to_string(), source })
}

pub fn load_checkpoint(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path).map_err(|source| NnError::Io { path: path.display().to_string(), source })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let a = Tensor::matrix(2, 2, vec![0.1, -0.0, f64::MIN_POSITIVE, 1e300]).unwrap();
        let b = Tensor::new(vec![1, 2, 1], vec![3.0, 4.0]).unwrap();
        let bytes = encode_checkpoint([("a", &a), ("layer.b", &b)]);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back[0].0, "a");
        assert_eq!(back[1].1, b);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back[0].1), bits(&a));
    }

    #[test]
    fn rejects_corruption() {
        let t = Tensor::vector(vec![1.0, 2.0]);
        let bytes = encode_checkpoint([("t", &t)]);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_checkpoint(&bad).is_err());
        let dup = encode_checkpoint([("t", &t), ("t", &t)]);
        assert!(decode_checkpoint(&dup).is_err());
        assert_eq!(decode_checkpoint(&encode_checkpoint([])).unwrap().len(), 0);
    }
}
