use std::path::Path;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] metastab::Error),

    #[error("verification failed: {0} of {1} checks did not pass")]
    VerificationFailed(usize, usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    /// 0 pass, 1 internal error or failed verification, 2 usage or missing
    /// input, 3 the potential violates a modelling assumption.
    pub fn exit_code(&self) -> i32 {
        use metastab::Error as E;
        match self {
            CliError::Usage(_) | CliError::MissingArtifact(_) | CliError::Parse { .. } => 2,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            CliError::Io { .. } | CliError::VerificationFailed(..) => 1,
            CliError::Core(e) if e.is_model_assumption() => 3,
            CliError::Core(
                E::UnknownPotential(_)
                | E::InvalidParameter(_)
                | E::UnsupportedDimension(_)
                | E::DimensionMismatch { .. }
                | E::InvalidStateSet(_),
            ) => 2,
            CliError::Core(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingArtifact(_) => "missing_artifact",
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
            CliError::Core(e) if e.is_model_assumption() => "model_assumption",
            CliError::Core(_) => "stage_failure",
            CliError::VerificationFailed(..) => "verification_failed",
        }
    }
}

/// What goes to stderr on failure.
#[derive(Serialize)]
pub struct ErrorReport<'a> {
    pub error: ErrorBody<'a>,
}

#[derive(Serialize)]
pub struct ErrorBody<'a> {
    pub kind: &'a str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<&'a str>,
}

impl CliError {
    pub fn to_json(&self, stage: Option<&str>) -> String {
        let r = ErrorReport { error: ErrorBody { kind: self.kind(), message: self.to_string(), exit_code: self.exit_code(), stage } };
        serde_json::to_string(&r).expect("plain strings serialize")
    }
}
