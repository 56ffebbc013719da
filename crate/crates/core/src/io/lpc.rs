use std::fmt::Write as _;
use std::path::Path;

use crate::cloud::{LabeledPointCloud, MAX_PARTS};
use crate::error::{CoreError, Result};

struct Header {
    n: usize,
    d: usize,
    parts: usize,
}

fn parse_header(line: &str, path: &Path) -> Result<Header> {
    let bad = |reason: String| CoreError::MalformedHeader { path: path.to_path_buf(), line: 1, reason };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "LPC" || tokens[1] != "v1" {
        return Err(bad(format!("expected `LPC v1 n=<N> d=<D> parts=<C>`, got {line:?}")));
    }
    let field = |token: &str, key: &str| -> Result<usize> {
        token
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| bad(format!("expected {key}=<integer>, got {token:?}")))
    };
    let n = field(tokens[2], "n")?;
    let d = field(tokens[3], "d")?;
    let parts = field(tokens[4], "parts")?;
    if n == 0 {
        return Err(bad("n must be at least 1".into()));
    }
    if !(d == 2 || d == 3) {
        return Err(bad(format!("d must be 2 or 3, got {d}")));
    }
    if parts == 0 || parts > MAX_PARTS {
        return Err(bad(format!("parts must be in 1..={MAX_PARTS}, got {parts}")));
    }
    Ok(Header { n, d, parts })
}

/// Parses `.lpc` text. `path` is only used to label errors.
pub fn parse_lpc(text: &str, path: &Path) -> Result<LabeledPointCloud> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => parse_header(line, path)?,
        None => {
            return Err(CoreError::MalformedHeader {
                path: path.to_path_buf(),
                line: 1,
                reason: "empty file".into(),
            })
        }
    };

    let mut points = Vec::with_capacity(header.n * header.d);
    let mut labels = Vec::with_capacity(header.n);
    let mut last_line = 1;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| CoreError::MalformedLine { path: path.to_path_buf(), line: line_no, reason };
        if labels.len() == header.n {
            return Err(malformed(format!("more than the declared {} points", header.n)));
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != header.d + 1 {
            return Err(malformed(format!("expected {} fields, found {}", header.d + 1, tokens.len())));
        }
        for tok in &tokens[..header.d] {
            let v: f64 = tok.parse().map_err(|_| malformed(format!("invalid coordinate {tok:?}")))?;
            if !v.is_finite() {
                return Err(CoreError::NonFiniteCoordinate { path: path.to_path_buf(), line: line_no });
            }
            points.push(v);
        }
        let label_tok = tokens[header.d];
        let label: u64 = label_tok
            .parse()
            .map_err(|_| malformed(format!("invalid label {label_tok:?}")))?;
        if label >= header.parts as u64 {
            return Err(CoreError::LabelOutOfRange {
                path: path.to_path_buf(),
                line: line_no,
                label,
                parts: header.parts,
            });
        }
        labels.push(label as u16);
    }
    if labels.len() != header.n {
        return Err(CoreError::MalformedLine {
            path: path.to_path_buf(),
            line: last_line,
            reason: format!("declared {} points, found {}", header.n, labels.len()),
        });
    }
    LabeledPointCloud::new(points, header.d, labels, header.parts)
}

pub fn read_lpc(path: impl AsRef<Path>) -> Result<LabeledPointCloud> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
    parse_lpc(&text, path)
}

/// Canonical text form: 17 significant digits per coordinate, which
/// round-trips every `f64` exactly.
pub fn render_lpc(cloud: &LabeledPointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * (cloud.dim() * 25 + 4) + 40);
    let _ = writeln!(out, "LPC v1 n={} d={} parts={}", cloud.len(), cloud.dim(), cloud.parts());
    for (i, label) in cloud.labels().iter().enumerate() {
        for v in cloud.point(i) {
            let _ = write!(out, "{v:.16e} ");
        }
        let _ = writeln!(out, "{label}");
    }
    out
}

pub fn write_lpc(cloud: &LabeledPointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_lpc(cloud)).map_err(|e| CoreError::io(path, e))
}
