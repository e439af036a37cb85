//! Reference resolution and compilation of PSI schema into the JSON Schema
//! (draft-04) subset understood by the validator.

use std::collections::HashMap;
use std::sync::Arc;

use crate::query::encode_query;
use crate::schema::lang::{classify_key, ConstraintKey, Reference, Scope};
use crate::schema::template::instantiate_template;
use crate::schema::{predefined, SchemaError};
use crate::value::{serialize_json, Mapping, Value};

pub const DRAFT_04_HYPER_SCHEMA: &str = "http://json-schema.org/draft-04/hyper-schema#";

const MAX_RESOLUTION_DEPTH: usize = 64;

/// Resolves global schema addresses, e.g. by HTTP GET.
pub trait SchemaFetcher: Send + Sync {
    fn fetch(&self, address: &str, params: Option<&Mapping>) -> Result<Value, SchemaError>;
}

/// Query string for a parameterised reference: strings are sent verbatim,
/// every other value as JSON text.
pub fn params_to_query(params: &Mapping) -> String {
    let pairs: Vec<(String, String)> = params
        .iter()
        .map(|(k, v)| {
            let text = match v {
                Value::String(s) => s.clone(),
                other => serialize_json(other),
            };
            (k.clone(), text)
        })
        .collect();
    encode_query(&pairs)
}

/// Serves the predefined schema under `root`, delegating every other
/// address to `fallback`.
#[derive(Clone)]
pub struct PredefinedFetcher {
    root: String,
    fallback: Option<Arc<dyn SchemaFetcher>>,
}

impl PredefinedFetcher {
    pub fn new(root: impl Into<String>) -> Self {
        PredefinedFetcher {
            root: root.into().trim_end_matches('/').to_string(),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, fallback: Arc<dyn SchemaFetcher>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    pub fn root(&self) -> &str {
        &self.root
    }
}

impl SchemaFetcher for PredefinedFetcher {
    fn fetch(&self, address: &str, params: Option<&Mapping>) -> Result<Value, SchemaError> {
        let name = address
            .strip_prefix(&self.root)
            .and_then(|rest| rest.strip_prefix('/'));
        if let Some(template) = name.and_then(predefined::get) {
            let empty = Mapping::new();
            return Ok(instantiate_template(template, params.unwrap_or(&empty)));
        }
        match &self.fallback {
            Some(f) => f.fetch(address, params),
            None => Err(SchemaError::ResolutionIo {
                address: address.to_string(),
                message: "no schema is published at this address".into(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
enum Binding {
    Global(String),
    Schema(Value),
}

/// Local names in scope plus the fetcher for global addresses. Always
/// pre-populated with the predefined names.
pub struct ResolutionContext<'a> {
    fetcher: &'a dyn SchemaFetcher,
    scopes: Vec<HashMap<String, Binding>>,
    chain: Vec<String>,
}

impl<'a> ResolutionContext<'a> {
    /// `schema_root` is the URI of the schema collection predefined names
    /// resolve under (`$integer` → `{schema_root}/integer`).
    pub fn new(schema_root: &str, fetcher: &'a dyn SchemaFetcher) -> Self {
        let root = schema_root.trim_end_matches('/');
        let predefined = predefined::names()
            .map(|name| (name.to_string(), Binding::Global(format!("{root}/{name}"))))
            .collect();
        ResolutionContext {
            fetcher,
            scopes: vec![predefined],
            chain: Vec::new(),
        }
    }

    fn lookup(&self, name: &str) -> Option<&Binding> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    /// Resolves one reference to the (uncompiled) schema it denotes.
    pub fn resolve_reference(&self, reference: &Reference) -> Result<Value, SchemaError> {
        let params = reference.params.as_ref();
        match reference.scope() {
            Scope::Global => self.fetcher.fetch(&reference.address, params),
            Scope::Local => match self.lookup(&reference.address) {
                Some(Binding::Global(address)) => self.fetcher.fetch(address, params),
                Some(Binding::Schema(schema)) => Ok(match params {
                    Some(p) => crate::schema::template::SchemaTemplate::new(schema.clone())
                        .map(|t| instantiate_template(&t, p))?,
                    None => schema.clone(),
                }),
                None => Err(SchemaError::Unresolved(reference.address.clone())),
            },
        }
    }

    fn chain_key(reference: &Reference) -> String {
        match &reference.params {
            Some(p) => format!("{}?{}", reference.address, params_to_query(p)),
            None => reference.address.clone(),
        }
    }
}

/// A schema in the compiled JSON Schema subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledSchema(pub Value);

impl CompiledSchema {
    pub fn as_value(&self) -> &Value {
        &self.0
    }

    pub fn into_value(self) -> Value {
        self.0
    }
}

/// Compiles a PSI schema; object results carry the draft-04 `$schema` key.
pub fn compile(
    schema: &Value,
    ctx: &mut ResolutionContext<'_>,
) -> Result<CompiledSchema, SchemaError> {
    let compiled = compile_fragment(schema, ctx)?;
    Ok(CompiledSchema(match compiled {
        Value::Object(m) => {
            let mut out = Mapping::new();
            out.insert("$schema".into(), DRAFT_04_HYPER_SCHEMA.into());
            out.extend(m.into_iter().filter(|(k, _)| k != "$schema"));
            Value::Object(out)
        }
        other => other,
    }))
}

/// Compiles without adding the root `$schema` annotation.
pub fn compile_fragment(
    schema: &Value,
    ctx: &mut ResolutionContext<'_>,
) -> Result<Value, SchemaError> {
    match schema {
        Value::Integer(_) | Value::Number(_) | Value::Bool(_) => Ok(schema.clone()),
        Value::String(s) => {
            if let Some(reference) = Reference::parse(s) {
                compile_reference(&reference, ctx)
            } else if let Some(media_type) = s.strip_prefix('@') {
                rich_type_schema(media_type)
            } else {
                Ok(schema.clone())
            }
        }
        Value::Array(items) => items
            .iter()
            .map(|item| compile_fragment(item, ctx))
            .collect::<Result<Vec<_>, _>>()
            .map(Value::Array),
        Value::Object(m) => compile_object(m, ctx),
    }
}

fn rich_type_schema(media_type: &str) -> Result<Value, SchemaError> {
    if media_type.is_empty() {
        return Err(SchemaError::Malformed(
            "rich type '@' has no media type".into(),
        ));
    }
    let mut m = Mapping::new();
    m.insert("type".into(), "string".into());
    m.insert("format".into(), "uri".into());
    m.insert("mediaType".into(), media_type.into());
    Ok(Value::Object(m))
}

fn compile_reference(
    reference: &Reference,
    ctx: &mut ResolutionContext<'_>,
) -> Result<Value, SchemaError> {
    let key = ResolutionContext::chain_key(reference);
    if ctx.chain.contains(&key) {
        return Err(SchemaError::Cycle(reference.address.clone()));
    }
    if ctx.chain.len() >= MAX_RESOLUTION_DEPTH {
        return Err(SchemaError::Cycle(reference.address.clone()));
    }
    let resolved = ctx.resolve_reference(reference)?;
    ctx.chain.push(key);
    let out = compile_fragment(&resolved, ctx);
    ctx.chain.pop();
    out
}

fn compile_object(m: &Mapping, ctx: &mut ResolutionContext<'_>) -> Result<Value, SchemaError> {
    let mut classified = Vec::with_capacity(m.len());
    let mut scope = HashMap::new();
    for (key, value) in m {
        let kind = classify_key(key)?;
        if let ConstraintKey::LocalDefinition(name) = &kind {
            scope.insert(name.clone(), Binding::Schema(value.clone()));
        }
        classified.push((key, kind, value));
    }

    let has_scope = !scope.is_empty();
    if has_scope {
        ctx.scopes.push(scope);
    }
    let out = compile_object_in_scope(&classified, ctx);
    if has_scope {
        ctx.scopes.pop();
    }
    out
}

fn compile_object_in_scope(
    props: &[(&String, ConstraintKey, &Value)],
    ctx: &mut ResolutionContext<'_>,
) -> Result<Value, SchemaError> {
    let mut references = props.iter().filter_map(|(key, kind, value)| match kind {
        ConstraintKey::Reference(address) => Some((key, address, value)),
        _ => None,
    });
    if let Some((key, address, value)) = references.next() {
        if references.next().is_some() {
            return Err(SchemaError::Malformed(
                "an object may hold at most one parameterised reference".into(),
            ));
        }
        let Value::Object(params) = value else {
            return Err(SchemaError::Malformed(format!(
                "parameters of {key:?} must be an object"
            )));
        };
        let discarded: Vec<&str> = props
            .iter()
            .filter(|(k, kind, _)| *k != *key && !matches!(kind, ConstraintKey::LocalDefinition(_)))
            .map(|(k, _, _)| k.as_str())
            .collect();
        if !discarded.is_empty() {
            tracing::warn!(reference = %key, ?discarded, "properties beside a parameterised reference are ignored");
        }
        return compile_reference(
            &Reference::with_params(address.clone(), params.clone()),
            ctx,
        );
    }

    let mut out = Mapping::new();
    let mut properties = Mapping::new();
    let mut required = Vec::new();
    let mut is_object = false;

    for (_, kind, value) in props {
        match kind {
            ConstraintKey::LocalDefinition(_) | ConstraintKey::Reference(_) => {}
            ConstraintKey::AdditionalProperties => {
                out.insert("additionalProperties".into(), compile_fragment(value, ctx)?);
                is_object = true;
            }
            ConstraintKey::Mandatory(name)
            | ConstraintKey::Optional(name)
            | ConstraintKey::MandatoryValue(name)
            | ConstraintKey::OptionalValue(name) => {
                let is_value_form = matches!(
                    kind,
                    ConstraintKey::MandatoryValue(_) | ConstraintKey::OptionalValue(_)
                );
                let compiled = if is_value_form && !contains_schema_syntax(value) {
                    let mut e = Mapping::new();
                    e.insert("enum".into(), Value::Array(vec![(*value).clone()]));
                    Value::Object(e)
                } else {
                    compile_fragment(value, ctx)?
                };
                properties.insert(name.clone(), compiled);
                if matches!(
                    kind,
                    ConstraintKey::Mandatory(_) | ConstraintKey::MandatoryValue(_)
                ) && !required.contains(name)
                {
                    required.push(name.clone());
                }
                is_object = true;
            }
            ConstraintKey::Keyword(k) => {
                let target = match k.as_str() {
                    "allItems" => "items",
                    "allof" => "allOf",
                    other => other,
                };
                let compiled = compile_fragment(value, ctx)?;
                merge_keyword(&mut out, target, compiled);
            }
        }
    }

    if !properties.is_empty() {
        match out.get_mut("properties") {
            Some(Value::Object(existing)) => existing.extend(properties),
            _ => {
                out.insert("properties".into(), Value::Object(properties));
            }
        }
    }
    if !required.is_empty() {
        match out.get_mut("required") {
            Some(Value::Array(existing)) => {
                for name in required {
                    if !existing.iter().any(|v| v.as_str() == Some(&name)) {
                        existing.push(name.into());
                    }
                }
            }
            _ => {
                out.insert(
                    "required".into(),
                    Value::Array(required.into_iter().map(Value::String).collect()),
                );
            }
        }
    }
    if is_object && !out.contains_key("type") {
        out.insert("type".into(), "object".into());
    }
    check_keyword_arguments(&out)?;
    Ok(Value::Object(out))
}

fn merge_keyword(out: &mut Mapping, key: &str, value: Value) {
    match (key, out.get_mut(key), value) {
        ("allOf", Some(Value::Array(existing)), Value::Array(more)) => existing.extend(more),
        (_, _, value) => {
            out.insert(key.to_string(), value);
        }
    }
}

/// Whether a value-form argument is really a schema: it mentions a
/// reference or a rich type somewhere.
fn contains_schema_syntax(v: &Value) -> bool {
    match v {
        Value::String(s) => Reference::parse(s).is_some() || (s.starts_with('@') && s.len() > 1),
        Value::Array(items) => items.iter().any(contains_schema_syntax),
        Value::Object(m) => m
            .iter()
            .any(|(k, v)| Reference::parse(k).is_some() || contains_schema_syntax(v)),
        _ => false,
    }
}

const TYPE_NAMES: [&str; 7] = [
    "integer", "number", "string", "boolean", "array", "object", "null",
];

fn check_keyword_arguments(out: &Mapping) -> Result<(), SchemaError> {
    let bad = |k: &str, why: &str| Err(SchemaError::Malformed(format!("{k}: {why}")));
    for (k, v) in out {
        match k.as_str() {
            "minItems" | "maxItems" => {
                if !matches!(v, Value::Integer(i) if *i >= 0) {
                    return bad(k, "expected a non-negative integer");
                }
            }
            "minimum" | "maximum" => {
                if v.as_f64().is_none() {
                    return bad(k, "expected a number");
                }
            }
            "type" => {
                let ok = match v {
                    Value::String(s) => TYPE_NAMES.contains(&s.as_str()),
                    Value::Array(items) => items
                        .iter()
                        .all(|t| t.as_str().is_some_and(|s| TYPE_NAMES.contains(&s))),
                    _ => false,
                };
                if !ok {
                    return bad(k, "expected a type name or array of type names");
                }
            }
            "enum" | "allOf" | "oneOf" | "required" => {
                if !matches!(v, Value::Array(_)) {
                    return bad(k, "expected an array");
                }
            }
            "properties" if !matches!(v, Value::Object(_)) => {
                return bad(k, "expected an object");
            }
            _ => {}
        }
    }
    Ok(())
}
