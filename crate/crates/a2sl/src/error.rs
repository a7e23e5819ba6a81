use std::path::PathBuf;

use serde::Serialize;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The scenario (or an input file) is malformed; `path` names the field.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("unknown scenario {0:?} (not a file and not a built-in)")]
    UnknownScenario(String),

    #[error("bad override {spec:?}: {reason}")]
    Override { spec: String, reason: String },

    #[error("{file}, row {row}: unknown label {label:?}")]
    UnknownLabel { file: PathBuf, row: usize, label: String },

    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: PathBuf, column: String },

    /// A core check failed while loading or validating.
    #[error("{0}")]
    Invalid(a2sl_core::Error),

    #[error("{path}: {source}")]
    Field {
        path: String,
        #[source]
        source: a2sl_core::Error,
    },

    /// A core computation failed during a run.
    #[error("{0}")]
    Runtime(a2sl_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("plot {path}: {message}")]
    Plot { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }

    pub fn field(path: impl Into<String>) -> impl FnOnce(a2sl_core::Error) -> Self {
        let path = path.into();
        move |source| CliError::Field { path, source }
    }

    pub fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// 2 for anything wrong with the inputs, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. }
            | CliError::UnknownScenario(_)
            | CliError::Override { .. }
            | CliError::UnknownLabel { .. }
            | CliError::MissingColumn { .. }
            | CliError::Invalid(_)
            | CliError::Field { .. }
            | CliError::Json { .. } => 2,
            CliError::Runtime(_) | CliError::Io { .. } | CliError::Csv { .. } | CliError::Plot { .. } => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema { .. } => "Schema",
            CliError::UnknownScenario(_) => "UnknownScenario",
            CliError::Override { .. } => "Override",
            CliError::UnknownLabel { .. } => "UnknownLabel",
            CliError::MissingColumn { .. } => "MissingColumn",
            CliError::Invalid(e) | CliError::Runtime(e) | CliError::Field { source: e, .. } => e.kind(),
            CliError::Io { .. } => "Io",
            CliError::Csv { .. } => "Csv",
            CliError::Json { .. } => "Json",
            CliError::Plot { .. } => "Plot",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

/// What the binary prints on stderr before exiting with a nonzero code.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}
