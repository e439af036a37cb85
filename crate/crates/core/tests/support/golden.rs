//! Predefined schema listings and worked compile/validate examples.

use std::sync::Arc;

use psi_core::http::Request;
use psi_core::schema::compiler::PredefinedFetcher;
use psi_core::schema::validator::{validate, validate_psi, OfflineResolver};
use psi_core::schema::{compile, ResolutionContext, SchemaError, SchemaFetcher};
use psi_core::{serialize_json, Mapping, Value};

use super::{get, json, world};

/// Serialization with object keys sorted, so key order does not matter.
pub fn canonical(v: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                Value::Object(keys.into_iter().map(|k| (k.clone(), sort(&m[k]))).collect())
            }
            Value::Array(a) => Value::Array(a.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    serialize_json(&sort(v))
}

pub const TEMPLATES: &[(&str, &str)] = &[
    (
        "integer",
        r#"{ "type": "integer", "minimum": "%min", "maximum": "%max", "default": "%default" }"#,
    ),
    (
        "number",
        r#"{ "type": "number", "minimum": "%min", "maximum": "%max", "default": "%default" }"#,
    ),
    ("boolean", r#"{ "type": "boolean", "default": "%default" }"#),
    ("string", r#"{ "type": "string", "default": "%default" }"#),
    ("object", r#"{ "type": "object", "default": "%default" }"#),
    (
        "array",
        r#"{ "type": "array", "items": "%items", "minItems": "%size", "maxItems": "%size" }"#,
    ),
    (
        "richValueSchema",
        r#"{ "/type=": "string", "/format=": "uri", "/mediaType=": "%mediaType" }"#,
    ),
    (
        "arrayAttribute",
        r#"{ "allof": [ "$attribute" ], "/emits": { "/type": "array", "/items": { "$array": { "allItems": "%allItems" } } } }"#,
    ),
    (
        "numberAttribute",
        r#"{ "allof" : [ "$attribute" ], "/emits": { "/type": { "enum": [ "integer", "number" ] } } }"#,
    ),
    (
        "fixedAttribute",
        r#"{ "allof": [ "$attribute" ], "/emits": { "/enum": "%values" } }"#,
    ),
    (
        "nominalAttribute",
        r#"{ "allof": [ "$attribute" ], "/emits": { "/enum": { "$array": { "allItems": "%allItems" } } } }"#,
    ),
    (
        "atomicAttribute",
        r#"{ "allof": [ "$attribute" ], "/emits": { "/type": { "enum": [ "integer", "number", "boolean", "string" ] } } }"#,
    ),
    (
        "richValueAttribute",
        r#"{ "allof": [ "$attribute" ], "/emits": { "$richValueSchema" : { "mediaType": "%mediaType" } } }"#,
    ),
];

pub const FIXED: &[(&str, &str)] = &[
    (
        "atomicValue",
        r#"{ "type": [ "integer", "number", "boolean", "string" ] }"#,
    ),
    (
        "atomicValueSchema",
        r#"{ "/type": { "enum" : [ "integer", "number", "boolean", "string" ] } }"#,
    ),
    (
        "numberSchema",
        r#"{ "/type": { "enum" : [ "integer", "number" ] } }"#,
    ),
    (
        "nominalValueSchema",
        r#"{ "/enum": { "$array": { "allItems": "$string" } } }"#,
    ),
    ("uri", r#"{ "type": "string", "format": "uri" }"#),
    (
        "relation",
        r#"{ "/psiType=": "relation", "/uri=": "$uri", "?description=": "$string", "/size=": "$integer",
             "/defaultAttribute=": "$uri", "/attributes=": { "$array" : { "items" : "$uri" } }, "?querySchema=": "$object" }"#,
    ),
    (
        "attribute",
        r#"{ "/psiType=": "attribute", "/uri=": "$uri", "?description=": "$string", "/emits=": "$object",
             "?relation=": "$uri",
             "?subattributes=": { "oneOf" : [ { "$array": { "allItems": "$uri" } }, { "/*" : "$uri" } ] },
             "?querySchema=": "$object" }"#,
    ),
];

pub fn templates_match_listings() {
    let w = world();
    for (name, listing) in TEMPLATES {
        let served = get(
            &w.svc,
            &format!("http://example.org/schema/{name}?template=true"),
        );
        assert_eq!(canonical(&served), canonical(&json(listing)), "{name}");
    }
    for (name, listing) in FIXED {
        let served = get(&w.svc, &format!("http://example.org/schema/{name}"));
        assert_eq!(canonical(&served), canonical(&json(listing)), "{name}");
    }
    assert!(TEMPLATES.len() + FIXED.len() >= 12);
}

pub fn every_predefined_name_is_listed() {
    let w = world();
    let list = get(&w.svc, "http://example.org/schema");
    let served: Vec<&str> = list
        .get("resources")
        .unwrap()
        .as_array()
        .unwrap()
        .iter()
        .map(|u| u.as_str().unwrap().rsplit('/').next().unwrap())
        .collect();
    for (name, _) in TEMPLATES.iter().chain(FIXED) {
        assert!(served.contains(name), "{name} missing from {served:?}");
    }
}

pub fn instantiations() {
    let w = world();
    let cases = [
        ("number?min=10", r#"{"type":"number","minimum":10}"#),
        ("integer", r#"{"type":"integer"}"#),
        (
            "integer?min=1&title=Fold%20number",
            r#"{"type":"integer","minimum":1,"title":"Fold number"}"#,
        ),
        ("boolean", r#"{"type":"boolean"}"#),
        (
            "array?items=%5B%22%24number%22%2C%22%24number%22%5D&size=2",
            r#"{"type":"array","items":["$number","$number"],"minItems":2,"maxItems":2}"#,
        ),
        (
            "fixedAttribute?values=%5B%22a%22%2C%22b%22%5D",
            r#"{"allof":["$attribute"],"/emits":{"/enum":["a","b"]}}"#,
        ),
        (
            "richValueSchema?mediaType=image%2Fjpeg",
            r#"{"/type=":"string","/format=":"uri","/mediaType=":"image/jpeg"}"#,
        ),
    ];
    for (query, expected) in cases {
        let served = get(&w.svc, &format!("http://example.org/schema/{query}"));
        assert_eq!(canonical(&served), canonical(&json(expected)), "{query}");
    }
}

pub fn unknown_schema_is_not_found() {
    let w = world();
    let r = w
        .svc
        .handle(&Request::get("http://example.org/schema/nosuch"));
    assert_eq!(r.status, 404);
}

pub fn compile_here(schema: &Value) -> Result<Value, SchemaError> {
    let fetcher = PredefinedFetcher::new("http://example.org/schema");
    let mut ctx = ResolutionContext::new(fetcher.root(), &fetcher);
    compile(schema, &mut ctx).map(|c| c.into_value())
}

pub fn compile_examples() {
    let draft = "http://json-schema.org/draft-04/hyper-schema#";
    let cases = [
        (
            r#"{"/length":"$number","/width":"$number"}"#,
            format!(
                r#"{{"$schema":"{draft}","type":"object","properties":{{"length":{{"type":"number"}},"width":{{"type":"number"}}}},"required":["length","width"]}}"#
            ),
        ),
        (
            r#""@image/jpeg""#,
            format!(
                r#"{{"$schema":"{draft}","type":"string","format":"uri","mediaType":"image/jpeg"}}"#
            ),
        ),
        ("true", "true".to_string()),
        (
            r#"{"/version=":2}"#,
            format!(
                r#"{{"$schema":"{draft}","type":"object","properties":{{"version":{{"enum":[2]}}}},"required":["version"]}}"#
            ),
        ),
        (
            r#"{"$number":{"min":10}}"#,
            format!(r#"{{"$schema":"{draft}","type":"number","minimum":10}}"#),
        ),
    ];
    for (input, expected) in cases {
        let got = compile_here(&json(input)).unwrap();
        assert_eq!(canonical(&got), canonical(&json(&expected)), "{input}");
    }
    assert!(compile_here(&json(r#""$nosuch""#)).is_err());
}

pub fn compiled_rich_attribute_embeds_media_type() {
    let got = compile_here(&json(
        r#"{"$richValueAttribute":{"mediaType":"image/jpeg"}}"#,
    ))
    .unwrap();
    let emits = got.get("properties").unwrap().get("emits").unwrap();
    let media = emits.get("properties").unwrap().get("mediaType").unwrap();
    assert_eq!(media, &json(r#"{"enum":["image/jpeg"]}"#));
}

pub fn compile_output_is_byte_stable() {
    let schema = json(
        r#"{"/a":{"$array":{"allItems":"$number","size":3}},"?b":"@image/png","/c":{"/*":"$string"}}"#,
    );
    let first = serialize_json(&compile_here(&schema).unwrap());
    for _ in 0..5 {
        assert_eq!(serialize_json(&compile_here(&schema).unwrap()), first);
    }
}

pub fn every_predefined_value_schema_accepts_and_rejects() {
    let cases = [
        ("$integer", "3", "3.5"),
        ("$number", "3.5", r#""x""#),
        ("$boolean", "true", "1"),
        ("$string", r#""x""#, "1"),
        ("$object", r#"{"a":1}"#, "[]"),
        ("$array", "[1]", "{}"),
        ("$atomicValue", r#""x""#, "[1]"),
        ("$uri", r#""http://example.org/x""#, "3"),
        (
            "$atomicValueSchema",
            r#"{"type":"number"}"#,
            r#"{"type":"array"}"#,
        ),
        (
            "$numberSchema",
            r#"{"type":"integer"}"#,
            r#"{"type":"string"}"#,
        ),
        (
            "$nominalValueSchema",
            r#"{"enum":["a","b"]}"#,
            r#"{"enum":[1]}"#,
        ),
    ];
    for (schema, good, bad) in cases {
        let compiled = compile_here(&json(&format!("\"{schema}\""))).unwrap();
        assert!(
            validate(&json(good), &compiled).is_valid(),
            "{schema} should accept {good}"
        );
        assert!(
            !validate(&json(bad), &compiled).is_valid(),
            "{schema} should reject {bad}"
        );
    }
}

pub fn small_integer_array_example() {
    let compiled = compile_here(&json(
        r#"{"$array":{"allItems":{"$integer":{"min":0,"max":10}}}}"#,
    ))
    .unwrap();
    assert!(validate(&json("[2, 3, 7]"), &compiled).is_valid());
    assert!(!validate(&json("[0, -2, 11]"), &compiled).is_valid());
}

/// Serves a plausible address schema for the person example.
struct AddressFetcher;

impl SchemaFetcher for AddressFetcher {
    fn fetch(&self, address: &str, _params: Option<&Mapping>) -> Result<Value, SchemaError> {
        assert_eq!(address, "http://example.org/schema/address");
        Ok(json(
            r#"{"/number":"$integer","/street":"$string","/suburb":"$string"}"#,
        ))
    }
}

pub fn person_example() {
    let schema = json(
        r#"{
          "/version=": 2,
          "/id": "$integer",
          "/name": { "?first": "$string", "/last": "$string" },
          "/addresses": { "$array": { "items": "$http://example.org/schema/address", "minItems": 1 } }
        }"#,
    );
    let fetcher =
        PredefinedFetcher::new("http://example.org/schema").with_fallback(Arc::new(AddressFetcher));
    let check = |value: &str| {
        let mut ctx = ResolutionContext::new(fetcher.root(), &fetcher);
        validate_psi(&json(value), &schema, &mut ctx, &OfflineResolver).unwrap()
    };
    // The schema requires "addresses"; the sample value spells it "address".
    let corrected = r#"{ "version": 2, "id": 231, "name": { "first": "Amy", "last": "Jones" },
        "addresses": [ { "number": 14, "street": "Bird St.", "suburb": "Epping" } ] }"#;
    assert!(
        check(corrected).is_valid(),
        "{}",
        check(corrected).summary()
    );
    let literal = corrected.replace("\"addresses\"", "\"address\"");
    let outcome = check(&literal);
    assert!(!outcome.is_valid());
    assert!(outcome.summary().contains("addresses"));
    let wrong_version = corrected.replace("\"version\": 2", "\"version\": 3");
    assert!(!check(&wrong_version).is_valid());
}
