use std::fmt;

use pcgen_core::CoreError;
use pcgen_metrics::MetricsError;
use pcgen_model::ModelError;
use pcgen_nn::NnError;
use pcgen_synth::SynthError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

/// A bad flag combination, missing input or unusable configuration.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn core_code(e: &CoreError) -> u8 {
    match e {
        CoreError::Io { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn nn_code(e: &NnError) -> u8 {
    match e {
        NnError::Checkpoint(_) | NnError::LabelOutOfRange { .. } => EXIT_DATA,
        NnError::Io { .. } => EXIT_USAGE,
        _ => EXIT_INTERNAL,
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Nn(e) => nn_code(e),
        ModelError::Core(e) => core_code(e),
        ModelError::Config(_) | ModelError::TauOutOfRange { .. } => EXIT_USAGE,
        ModelError::EmptyDataset | ModelError::PartAbsent(_) | ModelError::Shape(_) | ModelError::Checkpoint(_) => {
            EXIT_DATA
        }
        ModelError::StepOutOfRange { .. } => EXIT_INTERNAL,
    }
}

fn metrics_code(e: &MetricsError) -> u8 {
    match e {
        MetricsError::VocabMismatch(..) | MetricsError::TooLarge { .. } => EXIT_USAGE,
        MetricsError::Entry { source, .. } => metrics_code(source),
        MetricsError::ThreadPool(_) => EXIT_INTERNAL,
        _ => EXIT_DATA,
    }
}

fn synth_code(e: &SynthError) -> u8 {
    match e {
        SynthError::BadConfig(_) | SynthError::EmptySet | SynthError::Json { .. } => EXIT_USAGE,
        SynthError::InsufficientDonors(_) | SynthError::MissingPart { .. } => EXIT_DATA,
        SynthError::Core(e) => core_code(e),
    }
}

/// Process exit code for a failed run: 2 usage or configuration, 3 invalid
/// input data, 4 internal invariant violation.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<serde_json::Error>() || cause.is::<std::io::Error>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return model_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MetricsError>() {
            return metrics_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SynthError>() {
            return synth_code(e);
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<NnError>() {
            return nn_code(e);
        }
    }
    EXIT_INTERNAL
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_the_error_class() {
        assert_eq!(exit_code(&usage("x")), 2);
        let e = anyhow::Error::from(MetricsError::VocabMismatch(2, 3)).context("evaluating");
        assert_eq!(exit_code(&e), 2);
        assert_eq!(exit_code(&ModelError::PartAbsent(1).into()), 3);
        assert_eq!(exit_code(&ModelError::Nn(NnError::NonFinite("x".into())).into()), 4);
        assert_eq!(exit_code(&CoreError::InvalidCloud("x".into()).into()), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("unclassified")), 4);
        let nested = MetricsError::Entry { i: 0, j: 1, source: Box::new(MetricsError::PartMissing(0)) };
        assert_eq!(exit_code(&Err::<(), _>(nested).context("ctx").unwrap_err()), 3);
    }
}
