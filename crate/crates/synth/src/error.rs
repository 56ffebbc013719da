use pcgen_core::CoreError;
use thiserror::Error;

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("bad config: {0}")]
    BadConfig(String),

    #[error("requested an empty set")]
    EmptySet,

    #[error("recombination needs at least one donor, got {0}")]
    InsufficientDonors(usize),

    #[error("donor {donor} lacks part {part}")]
    MissingPart { donor: usize, part: u16 },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}
