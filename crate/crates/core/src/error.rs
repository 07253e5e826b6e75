//! Error classes shared across the toolkit.
//!
//! `Io`, `Syntax`, `SchemaVersion`, and `Invariant` describe problems with
//! input data and map to exit code 1 at the CLI. `InvalidArgument` marks a
//! violated call precondition (bad `k`, out-of-range threshold, ...) and maps
//! to exit code 2, like any other usage error.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Filesystem failure while reading or writing `path`.
    #[error("{path}: {message}")]
    Io { path: String, message: String },

    /// The file is not well-formed JSON / JSONL.
    #[error("{path}:{line}: invalid JSON: {message}")]
    Syntax {
        path: String,
        line: usize,
        message: String,
    },

    /// The file declares a schema version this toolkit does not understand.
    #[error("{path}: unsupported schema version {found:?}, expected \"1\"")]
    SchemaVersion { path: String, found: Option<String> },

    /// A domain invariant is violated. `path`, `record`, and `field` locate
    /// the offending value when the violation comes from a file.
    #[error("{}{message}", location_prefix(.path, .record, .field))]
    Invariant {
        path: Option<String>,
        record: Option<String>,
        field: Option<String>,
        message: String,
    },

    /// A precondition on a call was violated (usage error).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A text embedder failed on the given input.
    #[error("embedding failed for {text:?}: {message}")]
    Embedding { text: String, message: String },
}

fn location_prefix(
    path: &Option<String>,
    record: &Option<String>,
    field: &Option<String>,
) -> String {
    let mut out = String::new();
    if let Some(p) = path {
        out.push_str(p);
        out.push_str(": ");
    }
    if let Some(r) = record {
        out.push_str(&format!("record {r:?}: "));
    }
    if let Some(f) = field {
        out.push_str(&format!("field {f}: "));
    }
    out
}

impl Error {
    /// An invariant violation with no location attached yet.
    pub fn invariant(message: impl Into<String>) -> Self {
        Error::Invariant {
            path: None,
            record: None,
            field: None,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True for errors that should surface as usage errors (CLI exit 2).
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }

    /// Attach file/record/field context to an `Invariant` error. Existing
    /// context is kept; an already-set field is nested under the new one.
    pub fn locate(self, path: Option<&str>, record: Option<&str>, field: Option<&str>) -> Self {
        match self {
            Error::Invariant {
                path: p,
                record: r,
                field: f,
                message,
            } => Error::Invariant {
                path: p.or_else(|| path.map(str::to_owned)),
                record: r.or_else(|| record.map(str::to_owned)),
                field: match (field, f) {
                    (Some(outer), Some(inner)) => Some(format!("{outer}.{inner}")),
                    (Some(outer), None) => Some(outer.to_owned()),
                    (None, inner) => inner,
                },
                message,
            },
            other => other,
        }
    }
}
