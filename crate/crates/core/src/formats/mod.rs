//! Text formats: JSON instances and policies, CSV results, DOT graphs.
//!
//! JSON output is canonical: keys sorted, two-space indentation, LF line
//! endings, non-ASCII characters escaped and every float printed with 17
//! significant digits.

mod canonical;
mod dot;
mod instance;
mod policy;
mod results;

use thiserror::Error;

pub use dot::{export_dot, export_trace_dot, DotOptions};
pub use instance::{read_instance, read_instance_with, write_instance, ReadOptions};
pub use policy::{read_policy, write_policy};
pub use results::{read_results, write_results, Algorithm, ResultRow, RunStatus, RESULTS_HEADER};

/// Major version written and accepted.
pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum FormatError {
    /// Malformed JSON or a field of the wrong shape.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: unknown field")]
    UnknownField { path: String },
    #[error("unsupported schema version {0:?}")]
    Version(String),
    /// An id that does not resolve, or one declared twice.
    #[error("{path}: {message}")]
    Reference { path: String, message: String },
    #[error("results: {0}")]
    Csv(String),
}

/// Rejects documents from a newer major version before their fields are read.
fn check_version(text: &str) -> Result<(), FormatError> {
    #[derive(serde::Deserialize)]
    struct Probe {
        schema_version: Option<serde_json::Value>,
    }
    // Anything unreadable here is reported by the full parse.
    let Ok(Probe {
        schema_version: Some(serde_json::Value::String(v)),
    }) = serde_json::from_str::<Probe>(text)
    else {
        return Ok(());
    };
    match v.split('.').next().and_then(|m| m.parse::<u64>().ok()) {
        Some(1) => Ok(()),
        _ => Err(FormatError::Version(v)),
    }
}

/// Deserializes `text` after the version check. Unknown fields are an error
/// when `strict` and skipped otherwise.
fn parse<T: serde::de::DeserializeOwned>(text: &str, strict: bool) -> Result<T, FormatError> {
    check_version(text)?;
    let mut unknown: Vec<String> = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let value = {
        let mut record = |p: serde_ignored::Path<'_>| unknown.push(p.to_string());
        let tracking = serde_ignored::Deserializer::new(&mut de, &mut record);
        serde_path_to_error::deserialize(tracking).map_err(|e| FormatError::Schema {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?
    };
    de.end().map_err(|e| FormatError::Schema {
        path: ".".into(),
        message: e.to_string(),
    })?;
    match unknown.into_iter().next() {
        Some(path) if strict => Err(FormatError::UnknownField { path }),
        _ => Ok(value),
    }
}
