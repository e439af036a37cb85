use std::collections::BTreeSet;

use crate::schema::SchemaError;
use crate::value::{parse_json, Mapping, Value};

/// A schema whose leaf strings may be `%ARG` placeholders.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaTemplate {
    body: Value,
}

fn placeholder(v: &Value) -> Option<&str> {
    v.as_str()
        .and_then(|s| s.strip_prefix('%'))
        .filter(|name| !name.is_empty())
}

impl SchemaTemplate {
    /// Rejects placeholders used as object keys.
    pub fn new(body: Value) -> Result<Self, SchemaError> {
        fn check(v: &Value) -> Result<(), SchemaError> {
            match v {
                Value::Object(m) => {
                    for (k, v) in m {
                        if k.len() > 1 && k.starts_with('%') {
                            return Err(SchemaError::Malformed(format!(
                                "template argument {k:?} used as a key"
                            )));
                        }
                        check(v)?;
                    }
                    Ok(())
                }
                Value::Array(items) => items.iter().try_for_each(check),
                _ => Ok(()),
            }
        }
        check(&body)?;
        Ok(SchemaTemplate { body })
    }

    pub fn body(&self) -> &Value {
        &self.body
    }

    pub fn known_args(&self) -> BTreeSet<String> {
        fn walk(v: &Value, out: &mut BTreeSet<String>) {
            if let Some(name) = placeholder(v) {
                out.insert(name.to_string());
            }
            match v {
                Value::Object(m) => m.values().for_each(|v| walk(v, out)),
                Value::Array(items) => items.iter().for_each(|v| walk(v, out)),
                _ => {}
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.body, &mut out);
        out
    }
}

/// String arguments holding JSON text (`10`, `true`, `["a"]`) become that
/// value; any other string stays a string.
pub fn coerce_argument(v: &Value) -> Value {
    match v {
        Value::String(s) => parse_json(s).unwrap_or_else(|_| v.clone()),
        other => other.clone(),
    }
}

/// Fills placeholders from `args`. Properties whose placeholder has no
/// argument are dropped; arguments that match neither a placeholder nor a
/// root key are added to the root object.
pub fn instantiate_template(template: &SchemaTemplate, args: &Mapping) -> Value {
    let args: Mapping = args
        .iter()
        .map(|(k, v)| (k.clone(), coerce_argument(v)))
        .collect();
    let mut out = substitute(&template.body, &args).unwrap_or_else(|| template.body.clone());

    if let Value::Object(root) = &mut out {
        let known = template.known_args();
        let existing: Vec<String> = template
            .body
            .as_object()
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default();
        for (k, v) in &args {
            if !known.contains(k) && !existing.contains(k) {
                root.insert(k.clone(), v.clone());
            }
        }
    }
    out
}

/// `None` means "drop me".
fn substitute(v: &Value, args: &Mapping) -> Option<Value> {
    if let Some(name) = placeholder(v) {
        return args.get(name).cloned();
    }
    match v {
        Value::Object(m) => Some(Value::Object(
            m.iter()
                .filter_map(|(k, v)| substitute(v, args).map(|v| (k.clone(), v)))
                .collect(),
        )),
        Value::Array(items) => Some(Value::Array(
            items.iter().filter_map(|v| substitute(v, args)).collect(),
        )),
        other => Some(other.clone()),
    }
}
