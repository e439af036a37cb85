//! RFC 3986 percent-encoding of query strings.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("invalid percent escape at byte {0}")]
    BadEscape(usize),
    #[error("percent-decoded query is not UTF-8")]
    NotUtf8,
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

pub fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for &b in s.as_bytes() {
        if is_unreserved(b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Strict decoding: every `%` must start a two-digit hex escape. `+` is
/// a literal plus sign.
pub fn percent_decode(s: &str) -> Result<String, QueryError> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes
                .get(i + 1..i + 3)
                .and_then(|h| std::str::from_utf8(h).ok())
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or(QueryError::BadEscape(i))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).map_err(|_| QueryError::NotUtf8)
}

pub fn encode_query<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| {
            format!(
                "{}={}",
                percent_encode(k.as_ref()),
                percent_encode(v.as_ref())
            )
        })
        .collect::<Vec<_>>()
        .join("&")
}

/// Escape errors report their byte offset within the whole query.
pub fn decode_query(query: &str) -> Result<Vec<(String, String)>, QueryError> {
    let shift = |base: usize| {
        move |e| match e {
            QueryError::BadEscape(i) => QueryError::BadEscape(base + i),
            other => other,
        }
    };
    let mut out = Vec::new();
    let mut start = 0;
    for part in query.split('&') {
        let base = start;
        start += part.len() + 1;
        if part.is_empty() {
            continue;
        }
        let (k, v) = part.split_once('=').unwrap_or((part, ""));
        let key = percent_decode(k).map_err(shift(base))?;
        let value = percent_decode(v).map_err(shift(base + k.len() + 1))?;
        out.push((key, value));
    }
    Ok(out)
}
