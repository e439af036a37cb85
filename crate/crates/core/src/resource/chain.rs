//! Join chains carried in the `t` query argument: base64url of a JSON
//! array of `[transformer URI, emits schema]` pairs, applied in order.

use base64::engine::general_purpose::{URL_SAFE, URL_SAFE_NO_PAD};
use base64::Engine;

use crate::error::Error;
use crate::value::{parse_json, serialize_json, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub transformer: String,
    pub emits: Value,
}

pub fn encode_chain(chain: &[Link]) -> String {
    let value = Value::Array(
        chain
            .iter()
            .map(|l| Value::Array(vec![l.transformer.as_str().into(), l.emits.clone()]))
            .collect(),
    );
    URL_SAFE_NO_PAD.encode(serialize_json(&value))
}

pub fn decode_chain(text: &str) -> Result<Vec<Link>, Error> {
    let bad = |why: &str| Error::bad_request(format!("invalid join chain: {why}"));
    let bytes = URL_SAFE_NO_PAD
        .decode(text)
        .or_else(|_| URL_SAFE.decode(text))
        .map_err(|_| bad("not base64url"))?;
    let json = String::from_utf8(bytes).map_err(|_| bad("not UTF-8"))?;
    let value = parse_json(&json).map_err(|_| bad("not JSON"))?;
    let Value::Array(links) = value else {
        return Err(bad("not an array"));
    };
    if links.is_empty() {
        return Err(bad("empty"));
    }
    links
        .into_iter()
        .map(|l| match l {
            Value::Array(pair) if pair.len() == 2 => match (&pair[0], &pair[1]) {
                (Value::String(t), emits) => Ok(Link {
                    transformer: t.clone(),
                    emits: emits.clone(),
                }),
                _ => Err(bad("transformer must be a URI string")),
            },
            _ => Err(bad("links are [transformer, emits] pairs")),
        })
        .collect()
}
