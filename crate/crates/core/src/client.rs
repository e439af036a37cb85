//! Outbound GETs to resources that live at other services.

use crate::value::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("GET {uri} failed: {message}")]
pub struct FetchError {
    pub uri: String,
    /// HTTP status when the remote answered with a non-success code.
    pub status: Option<u16>,
    pub message: String,
}

pub trait ResourceClient: Send + Sync {
    /// GETs `uri` (query included) and parses the JSON body.
    fn get(&self, uri: &str) -> Result<Value, FetchError>;
}

/// Refuses every request; for services that never leave the process.
pub struct NoNetwork;

impl ResourceClient for NoNetwork {
    fn get(&self, uri: &str) -> Result<Value, FetchError> {
        Err(FetchError {
            uri: uri.to_string(),
            status: None,
            message: "remote access is disabled".into(),
        })
    }
}

/// Appends `extra` (already encoded) to the query of `uri`.
pub fn with_query(uri: &str, extra: &str) -> String {
    if extra.is_empty() {
        uri.to_string()
    } else if uri.contains('?') {
        format!("{uri}&{extra}")
    } else {
        format!("{uri}?{extra}")
    }
}
