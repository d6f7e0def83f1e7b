//! Command-line driver for the schema matching engine: configuration
//! loading, the `index` / `match` / `evaluate` / `ablate` lifecycle, and
//! exit-code mapping.

pub mod commands;
pub mod config;

use schematch_core::artifact::ArtifactError;
use schematch_core::enrich::EnrichError;
use schematch_core::eval::EvalError;
use schematch_core::pipeline::PipelineError;
use schematch_core::provider::ProviderError;
use schematch_core::schema::SchemaError;
use thiserror::Error;

/// Exit codes: 0 success, 1 validation error, 2 provider/transport
/// failure, 3 evaluation mismatch.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("provider failure: {0}")]
    Provider(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Provider(_) => 2,
            CliError::Mismatch(_) => 3,
        }
    }
}

impl From<SchemaError> for CliError {
    fn from(e: SchemaError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Configuration { .. } => CliError::Validation(e.to_string()),
            other => CliError::Provider(other.to_string()),
        }
    }
}

impl From<EnrichError> for CliError {
    fn from(e: EnrichError) -> Self {
        match e {
            EnrichError::Provider(p) => p.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Provider(p) => p.into(),
            PipelineError::Enrich(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::SchemaMismatch { .. } => CliError::Mismatch(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}
