use pcgen_core::PointCloudSet;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chamfer::{chamfer, PartSplit};
use crate::emd::{emd_exact, DEFAULT_EMD_CAP};
use crate::error::{MetricsError, Result};
use crate::kind::DistanceKind;
use crate::report::MetricValue;

/// Dense `rows × cols` pairwise distances between two sets, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub kind: DistanceKind,
    pub rows: usize,
    pub cols: usize,
    pub a_name: String,
    pub b_name: String,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    kind: DistanceKind,
    rows: usize,
    cols: usize,
    a: String,
    b: String,
    values: Vec<Vec<MetricValue>>,
}

const DMAT_MAGIC: &[u8; 4] = b"DMAT";
const DMAT_VERSION: u32 = 1;

impl DistanceMatrix {
    pub fn new(kind: DistanceKind, rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(MetricsError::Shape(format!("{} values for a {rows}×{cols} matrix", values.len())));
        }
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(MetricsError::Malformed("distances must be non-negative".into()));
        }
        Ok(Self { kind, rows, cols, a_name: String::new(), b_name: String::new(), values })
    }

    pub fn with_names(mut self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.a_name = a.into();
        self.b_name = b.into();
        self
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                values.push(self.get(i, j));
            }
        }
        Self {
            kind: self.kind,
            rows: self.cols,
            cols: self.rows,
            a_name: self.b_name.clone(),
            b_name: self.a_name.clone(),
            values,
        }
    }

    /// Applies `f` to every entry; used to probe metric invariances.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { values: self.values.iter().map(|&v| f(v)).collect(), ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        let json = MatrixJson {
            kind: self.kind,
            rows: self.rows,
            cols: self.cols,
            a: self.a_name.clone(),
            b: self.b_name.clone(),
            values: (0..self.rows).map(|i| self.row(i).iter().map(|&v| MetricValue::from(v)).collect()).collect(),
        };
        serde_json::to_string(&json).expect("matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: MatrixJson = serde_json::from_str(text).map_err(|e| MetricsError::Malformed(e.to_string()))?;
        if json.values.len() != json.rows || json.values.iter().any(|r| r.len() != json.cols) {
            return Err(MetricsError::Malformed("values do not match rows/cols".into()));
        }
        let values = json.values.into_iter().flatten().map(f64::from).collect();
        Ok(Self::new(json.kind, json.rows, json.cols, values)?.with_names(json.a, json.b))
    }

    /// Little-endian binary form: `DMAT`, u32 version, u32 rows, u32 cols,
    /// then the kind and both set names as u32-length-prefixed UTF-8, then
    /// `rows·cols` f64 values (`+∞` stored as the IEEE infinity).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.values.len() * 8);
        out.extend_from_slice(DMAT_MAGIC);
        for v in [DMAT_VERSION, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in [self.kind.to_string(), self.a_name.clone(), self.b_name.clone()] {
            out.extend_from_slice(&(s.len() as u32).to_le_bytes());
            out.extend_from_slice(s.as_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != DMAT_MAGIC {
            return Err(malformed("bad magic"));
        }
        if cur.u32()? != DMAT_VERSION {
            return Err(malformed("unsupported version"));
        }
        let rows = cur.u32()? as usize;
        let cols = cur.u32()? as usize;
        let mut strings = Vec::with_capacity(3);
        for _ in 0..3 {
            let len = cur.u32()? as usize;
            let s = std::str::from_utf8(cur.take(len)?).map_err(|_| malformed("invalid utf-8"))?;
            strings.push(s.to_string());
        }
        let count = rows.checked_mul(cols).and_then(|c| c.checked_mul(8)).ok_or_else(|| malformed("size overflow"))?;
        let raw = cur.take(count)?;
        if cur.pos != bytes.len() {
            return Err(malformed("trailing bytes"));
        }
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let kind = strings[0].parse()?;
        Ok(Self::new(kind, rows, cols, values)?.with_names(strings[1].clone(), strings[2].clone()))
    }
}

fn malformed(m: &str) -> MetricsError {
    MetricsError::Malformed(m.to_string())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len()).ok_or_else(|| malformed("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixOptions {
    pub threads: usize,
    pub emd_cap: usize,
}

impl Default for MatrixOptions {
    fn default() -> Self {
        Self { threads: 1, emd_cap: DEFAULT_EMD_CAP }
    }
}

/// Per-cloud data prepared once before the pairwise sweep.
enum Prepared<'a> {
    Raw(Vec<(&'a [f64], usize)>),
    Split(Vec<PartSplit>),
}

fn prepare(set: &PointCloudSet, kind: DistanceKind) -> Prepared<'_> {
    if kind.needs_labels() {
        Prepared::Split(set.iter().map(PartSplit::new).collect())
    } else {
        Prepared::Raw(set.iter().map(|c| (c.points(), c.dim())).collect())
    }
}

fn entry(kind: DistanceKind, a: &Prepared, b: &Prepared, i: usize, j: usize, cap: usize) -> Result<f64> {
    let r = match (kind, a, b) {
        (DistanceKind::Cd, Prepared::Raw(a), Prepared::Raw(b)) => {
            if a[i].1 != b[j].1 {
                return Err(MetricsError::DimMismatch(a[i].1, b[j].1));
            }
            chamfer(a[i].0, b[j].0, a[i].1)
        }
        (DistanceKind::Emd, Prepared::Raw(a), Prepared::Raw(b)) => {
            if a[i].1 != b[j].1 {
                return Err(MetricsError::DimMismatch(a[i].1, b[j].1));
            }
            emd_exact(a[i].0, b[j].0, a[i].1, cap)
        }
        (DistanceKind::Pcd, Prepared::Split(a), Prepared::Split(b)) => a[i].pcd(&b[j]),
        (DistanceKind::PartCd(p), Prepared::Split(a), Prepared::Split(b)) => a[i].part_cd(&b[j], p),
        _ => unreachable!("prepared data always matches the kind"),
    };
    r.map_err(|e| MetricsError::Entry { i, j, source: Box::new(e) })
}

fn check_vocab(a: &PointCloudSet, b: &PointCloudSet, kind: DistanceKind) -> Result<()> {
    if kind.needs_labels() && a.vocab().len() != b.vocab().len() {
        return Err(MetricsError::VocabMismatch(a.vocab().len(), b.vocab().len()));
    }
    Ok(())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| MetricsError::ThreadPool(e.to_string()))
}

/// Fills rows in parallel; each entry is computed serially into its own slot.
/// The reported error, if any, is the one with the smallest `(i, j)`.
fn fill_rows(
    values: &mut [f64],
    cols: usize,
    threads: usize,
    f: impl Fn(usize, usize) -> Result<f64> + Sync,
    first_col: impl Fn(usize) -> usize + Sync,
) -> Result<()> {
    if cols == 0 {
        return Ok(());
    }
    let errors: Vec<Option<MetricsError>> = pool(threads)?.install(|| {
        values
            .par_chunks_mut(cols)
            .enumerate()
            .map(|(i, row)| {
                for j in first_col(i)..cols {
                    match f(i, j) {
                        Ok(v) => row[j] = v,
                        Err(e) => return Some(e),
                    }
                }
                None
            })
            .collect()
    });
    match errors.into_iter().flatten().next() {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// `values[i][j] = kind(a[i], b[j])`, identical bytes for any thread count.
pub fn distance_matrix(
    a: &PointCloudSet,
    b: &PointCloudSet,
    kind: DistanceKind,
    opts: MatrixOptions,
) -> Result<DistanceMatrix> {
    check_vocab(a, b, kind)?;
    let (pa, pb) = (prepare(a, kind), prepare(b, kind));
    let (rows, cols) = (a.len(), b.len());
    let mut values = vec![0.0; rows * cols];
    fill_rows(&mut values, cols, opts.threads, |i, j| entry(kind, &pa, &pb, i, j, opts.emd_cap), |_| 0)?;
    Ok(DistanceMatrix::new(kind, rows, cols, values)?.with_names(a.name(), b.name()))
}

/// Distances within one set. Only the upper triangle is computed; the lower
/// triangle mirrors it and the diagonal is zero.
pub fn self_distance_matrix(a: &PointCloudSet, kind: DistanceKind, opts: MatrixOptions) -> Result<DistanceMatrix> {
    let pa = prepare(a, kind);
    let n = a.len();
    let mut values = vec![0.0; n * n];
    fill_rows(&mut values, n, opts.threads, |i, j| entry(kind, &pa, &pa, i, j, opts.emd_cap), |i| i + 1)?;
    for i in 0..n {
        for j in 0..i {
            values[i * n + j] = values[j * n + i];
        }
    }
    Ok(DistanceMatrix::new(kind, n, n, values)?.with_names(a.name(), a.name()))
}
