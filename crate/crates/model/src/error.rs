use pcgen_core::CoreError;
use pcgen_nn::NnError;
use thiserror::Error;

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("training set is empty")]
    EmptyDataset,

    #[error("step {t} outside 1..={steps}")]
    StepOutOfRange { t: usize, steps: usize },

    #[error("re-noise depth {tau} must be below {steps}")]
    TauOutOfRange { tau: usize, steps: usize },

    #[error("part {0} does not occur in the input labels")]
    PartAbsent(u16),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("bad config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
