use thiserror::Error;

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty point set")]
    EmptyInput,

    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("vocabulary mismatch: {0} vs {1} parts")]
    VocabMismatch(usize, usize),

    #[error("size mismatch: {0} vs {1} points")]
    SizeMismatch(usize, usize),

    #[error("{n} points exceeds the exact EMD cap of {cap}; raise the cap to allow it")]
    TooLarge { n: usize, cap: usize },

    #[error("SNAP needs at least two present parts, found {0}")]
    SinglePart(usize),

    #[error("part {0} missing from a cloud")]
    PartMissing(u16),

    #[error("part {part} is present in set {present} but absent from every cloud of set {absent}")]
    PartUniversallyAbsent { part: u16, present: String, absent: String },

    #[error("degenerate set: {0}")]
    DegenerateSet(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("label {label} out of range for {parts} parts")]
    LabelOutOfRange { label: usize, parts: usize },

    #[error("entry ({i}, {j}): {source}")]
    Entry {
        i: usize,
        j: usize,
        #[source]
        source: Box<MetricsError>,
    },

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("malformed distance matrix: {0}")]
    Malformed(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}
