//! `data:` URIs (RFC 2397). Only the header is interpreted; the payload is
//! kept as written.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataUri {
    pub media_type: String,
    /// `key=value` parameters in the order written, e.g. `charset=utf-8`.
    pub parameters: Vec<String>,
    pub is_base64: bool,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DataUriError {
    #[error("not a data URI")]
    NotDataUri,
    #[error("data URI has no ',' separating header and payload")]
    MissingComma,
}

pub const DEFAULT_MEDIA_TYPE: &str = "text/plain";

/// Parses a data URI. `data://` is tolerated as an alias of `data:`.
pub fn parse_data_uri(text: &str) -> Result<DataUri, DataUriError> {
    let rest = strip_scheme(text).ok_or(DataUriError::NotDataUri)?;
    let rest = rest.strip_prefix("//").unwrap_or(rest);
    let (header, payload) = rest.split_once(',').ok_or(DataUriError::MissingComma)?;

    let mut segments: Vec<&str> = header.split(';').collect();
    let is_base64 = segments.len() > 1
        && segments
            .last()
            .is_some_and(|s| s.trim().eq_ignore_ascii_case("base64"));
    if is_base64 {
        segments.pop();
    }
    let mut segments = segments.into_iter();
    let first = segments.next().unwrap_or("");
    let media_type = normalize_media_type(first).unwrap_or_else(|| DEFAULT_MEDIA_TYPE.to_string());
    let parameters = segments
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect();

    Ok(DataUri {
        media_type,
        parameters,
        is_base64,
        payload: payload.to_string(),
    })
}

fn strip_scheme(text: &str) -> Option<&str> {
    let trimmed = text.trim_start();
    if trimmed.len() >= 5 && trimmed[..5].eq_ignore_ascii_case("data:") {
        Some(&trimmed[5..])
    } else {
        None
    }
}

/// Lower-cased `type/subtype`, or `None` when the text is not a media type.
fn normalize_media_type(raw: &str) -> Option<String> {
    let decoded = crate::query::percent_decode(raw.trim()).ok()?;
    let (ty, sub) = decoded.split_once('/')?;
    if is_token(ty) && is_token(sub) {
        Some(format!(
            "{}/{}",
            ty.to_ascii_lowercase(),
            sub.to_ascii_lowercase()
        ))
    } else {
        None
    }
}

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"!#$%&'*+-.^_`|~".contains(&b))
}

impl fmt::Display for DataUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "data:{}", self.media_type)?;
        for p in &self.parameters {
            write!(f, ";{p}")?;
        }
        if self.is_base64 {
            f.write_str(";base64")?;
        }
        write!(f, ",{}", self.payload)
    }
}
