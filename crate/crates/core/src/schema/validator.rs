//! Validation of values against compiled schema, including rich values.

use std::fmt;

use crate::datauri::parse_data_uri;
use crate::schema::compiler::{compile, ResolutionContext};
use crate::schema::SchemaError;
use crate::value::Value;

const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// JSON Pointer into the validated value.
    pub path: String,
    pub keyword: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path = if self.path.is_empty() {
            "/"
        } else {
            &self.path
        };
        write!(f, "{path}: {} ({})", self.message, self.keyword)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationOutcome {
    pub violations: Vec<Violation>,
}

impl ValidationOutcome {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// One line per violation.
    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ResolveError(pub String);

/// Looks up the Content-Type of an HTTP(S) URI.
pub trait MediaTypeResolver: Send + Sync {
    /// `Ok(None)` when the response carries no Content-Type.
    fn content_type(&self, uri: &str) -> Result<Option<String>, ResolveError>;
}

/// Resolver for deployments without outbound HTTP.
pub struct OfflineResolver;

impl MediaTypeResolver for OfflineResolver {
    fn content_type(&self, uri: &str) -> Result<Option<String>, ResolveError> {
        Err(ResolveError(format!("no network access to resolve {uri}")))
    }
}

/// Validates against a compiled schema. `mediaType` is an annotation here.
pub fn validate(value: &Value, schema: &Value) -> ValidationOutcome {
    Validator { rich: None }.run(value, schema)
}

/// Compiles `schema` and validates, routing rich-typed parts through
/// `resolver`.
pub fn validate_psi(
    value: &Value,
    schema: &Value,
    ctx: &mut ResolutionContext<'_>,
    resolver: &dyn MediaTypeResolver,
) -> Result<ValidationOutcome, SchemaError> {
    let compiled = compile(schema, ctx)?;
    Ok(validate_with_resolver(value, compiled.as_value(), resolver))
}

/// Like [`validate`], but `mediaType` annotations are enforced.
pub fn validate_with_resolver(
    value: &Value,
    schema: &Value,
    resolver: &dyn MediaTypeResolver,
) -> ValidationOutcome {
    Validator {
        rich: Some(resolver),
    }
    .run(value, schema)
}

/// Checks that `value` is an http(s) or data URI for `media_type`. Only the
/// URI scheme and media type are inspected.
pub fn validate_rich(
    value: &Value,
    media_type: &str,
    resolver: &dyn MediaTypeResolver,
) -> ValidationOutcome {
    let mut out = Vec::new();
    check_rich(value, media_type, resolver, "", &mut out);
    ValidationOutcome { violations: out }
}

fn media_type_essence(content_type: &str) -> String {
    content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

fn check_rich(
    value: &Value,
    media_type: &str,
    resolver: &dyn MediaTypeResolver,
    path: &str,
    out: &mut Vec<Violation>,
) {
    let mut fail = |message: String| {
        out.push(Violation {
            path: path.to_string(),
            keyword: "mediaType".into(),
            message,
        })
    };
    let Some(text) = value.as_str() else {
        return fail(format!(
            "expected a URI string, found {}",
            value.type_name()
        ));
    };
    let expected = media_type_essence(media_type);
    let scheme = match url::Url::parse(text) {
        Ok(u) => u.scheme().to_string(),
        Err(e) => return fail(format!("not a valid URI: {e}")),
    };
    match scheme.as_str() {
        "http" | "https" => match resolver.content_type(text) {
            Ok(Some(ct)) if media_type_essence(&ct) == expected => {}
            Ok(Some(ct)) => fail(format!(
                "resource has Content-Type {ct}, expected {expected}"
            )),
            Ok(None) => fail("resource has no Content-Type".into()),
            Err(e) => fail(format!("could not verify media type (unreachable): {e}")),
        },
        "data" => match parse_data_uri(text) {
            Ok(d) if d.media_type.eq_ignore_ascii_case(&expected) => {}
            Ok(d) => fail(format!(
                "data URI has media type {}, expected {expected}",
                d.media_type
            )),
            Err(e) => fail(format!("malformed data URI: {e}")),
        },
        other => fail(format!("unsupported URI scheme {other:?} for a rich value")),
    }
}

struct Validator<'r> {
    rich: Option<&'r dyn MediaTypeResolver>,
}

fn type_matches(value: &Value, name: &str) -> bool {
    match name {
        "integer" => {
            value.as_i64().is_some() && !matches!(value, Value::Number(n) if n.fract() != 0.0)
        }
        "number" => matches!(value, Value::Integer(_) | Value::Number(_)),
        "string" => matches!(value, Value::String(_)),
        "boolean" => matches!(value, Value::Bool(_)),
        "array" => matches!(value, Value::Array(_)),
        "object" => matches!(value, Value::Object(_)),
        _ => false,
    }
}

fn child_path(path: &str, segment: &str) -> String {
    let escaped = segment.replace('~', "~0").replace('/', "~1");
    format!("{path}/{escaped}")
}

impl Validator<'_> {
    fn run(&self, value: &Value, schema: &Value) -> ValidationOutcome {
        let mut out = Vec::new();
        self.check(value, schema, "", 0, &mut out);
        ValidationOutcome { violations: out }
    }

    fn is_valid(&self, value: &Value, schema: &Value, depth: usize) -> bool {
        let mut out = Vec::new();
        self.check(value, schema, "", depth, &mut out);
        out.is_empty()
    }

    fn check(
        &self,
        value: &Value,
        schema: &Value,
        path: &str,
        depth: usize,
        out: &mut Vec<Violation>,
    ) {
        let mut fail = |keyword: &str, message: String| {
            out.push(Violation {
                path: path.to_string(),
                keyword: keyword.to_string(),
                message,
            })
        };
        if depth > MAX_DEPTH {
            return fail("depth", format!("nesting exceeds {MAX_DEPTH} levels"));
        }
        let m = match schema {
            Value::Object(m) => m,
            Value::Bool(true) => return,
            Value::Bool(false) => return fail("false", "no value is valid".into()),
            Value::Array(_) => return fail("schema", "an array is not a schema".into()),
            constant => {
                if !value.loosely_equals(constant) {
                    fail("const", format!("expected {constant}, found {value}"));
                }
                return;
            }
        };

        if let Some(t) = m.get("type") {
            let ok = match t {
                Value::String(name) => type_matches(value, name),
                Value::Array(names) => names
                    .iter()
                    .any(|n| n.as_str().is_some_and(|n| type_matches(value, n))),
                _ => false,
            };
            if !ok {
                fail(
                    "type",
                    format!("expected type {t}, found {}", value.type_name()),
                );
            }
        }

        if let Some(x) = value.as_f64() {
            if let Some(min) = m.get("minimum").and_then(Value::as_f64) {
                if x < min {
                    fail("minimum", format!("{value} is less than {min}"));
                }
            }
            if let Some(max) = m.get("maximum").and_then(Value::as_f64) {
                if x > max {
                    fail("maximum", format!("{value} is greater than {max}"));
                }
            }
        }

        if let Some(Value::Array(options)) = m.get("enum") {
            if !options.iter().any(|o| o.loosely_equals(value)) {
                fail(
                    "enum",
                    format!("{value} is not one of {}", Value::Array(options.clone())),
                );
            }
        }

        if let Some(Value::Array(all)) = m.get("allOf") {
            for sub in all {
                self.check(value, sub, path, depth + 1, out);
            }
        }

        if let Some(Value::Array(one)) = m.get("oneOf") {
            let matched = one
                .iter()
                .filter(|s| self.is_valid(value, s, depth + 1))
                .count();
            if matched != 1 {
                out.push(Violation {
                    path: path.to_string(),
                    keyword: "oneOf".into(),
                    message: format!(
                        "value matches {matched} of {} alternatives, expected exactly 1",
                        one.len()
                    ),
                });
            }
        }

        if let Value::Array(items) = value {
            let len = items.len() as i64;
            if let Some(min) = m.get("minItems").and_then(Value::as_i64) {
                if len < min {
                    out.push(self.violation(
                        path,
                        "minItems",
                        format!("{len} items, at least {min} required"),
                    ));
                }
            }
            if let Some(max) = m.get("maxItems").and_then(Value::as_i64) {
                if len > max {
                    out.push(self.violation(
                        path,
                        "maxItems",
                        format!("{len} items, at most {max} allowed"),
                    ));
                }
            }
            match m.get("items") {
                Some(Value::Array(positional)) => {
                    if positional.len() != items.len() {
                        out.push(self.violation(
                            path,
                            "items",
                            format!(
                                "{} items, exactly {} required",
                                items.len(),
                                positional.len()
                            ),
                        ));
                    }
                    for (i, (item, sub)) in items.iter().zip(positional).enumerate() {
                        self.check(item, sub, &child_path(path, &i.to_string()), depth + 1, out);
                    }
                }
                Some(sub) => {
                    for (i, item) in items.iter().enumerate() {
                        self.check(item, sub, &child_path(path, &i.to_string()), depth + 1, out);
                    }
                }
                None => {}
            }
        }

        if let Value::Object(obj) = value {
            let properties = m.get("properties").and_then(Value::as_object);
            if let Some(Value::Array(required)) = m.get("required") {
                for name in required.iter().filter_map(Value::as_str) {
                    if !obj.contains_key(name) {
                        out.push(self.violation(
                            path,
                            "required",
                            format!("missing property {name:?}"),
                        ));
                    }
                }
            }
            for (k, v) in obj {
                match properties.and_then(|p| p.get(k)) {
                    Some(sub) => self.check(v, sub, &child_path(path, k), depth + 1, out),
                    None => {
                        if let Some(extra) = m.get("additionalProperties") {
                            self.check(v, extra, &child_path(path, k), depth + 1, out);
                        }
                    }
                }
            }
        }

        if let (Some(resolver), Some(Value::String(media_type))) = (self.rich, m.get("mediaType")) {
            if value.as_str().is_some() {
                check_rich(value, media_type, resolver, path, out);
            }
        }
    }

    fn violation(&self, path: &str, keyword: &str, message: String) -> Violation {
        Violation {
            path: path.to_string(),
            keyword: keyword.to_string(),
            message,
        }
    }
}
