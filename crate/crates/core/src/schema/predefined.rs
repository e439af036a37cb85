//! Predefined value and resource schema every service publishes under its
//! schema collection. Bodies are templates; `%ARG` strings are parameters.

use std::sync::OnceLock;

use crate::schema::template::SchemaTemplate;
use crate::value::parse_json;

const SOURCES: &[(&str, &str)] = &[
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
        "richValueSchema",
        r#"{ "/type=": "string", "/format=": "uri", "/mediaType=": "%mediaType" }"#,
    ),
    (
        "relation",
        r#"{
  "/psiType=":      "relation",
  "/uri=":          "$uri",
  "?description=":  "$string",
  "/size=":         "$integer",
  "/defaultAttribute=": "$uri",
  "/attributes=":   { "$array" : { "items" : "$uri" } },
  "?querySchema=": "$object"
}"#,
    ),
    (
        "attribute",
        r#"{
  "/psiType=":      "attribute",
  "/uri=":          "$uri",
  "?description=":  "$string",
  "/emits=":        "$object",
  "?relation=":     "$uri",
  "?subattributes=": {
    "oneOf" : [
      { "$array": { "allItems": "$uri" } },
      { "/*" : "$uri" }
    ]
  },
  "?querySchema=": "$object"
}"#,
    ),
    (
        "arrayAttribute",
        r#"{
  "allof": [ "$attribute" ],
  "/emits": {
    "/type": "array",
    "/items": { "$array": { "allItems": "%allItems" } }
  }
}"#,
    ),
    (
        "numberAttribute",
        r#"{
  "allof" : [ "$attribute" ],
  "/emits": {
    "/type": { "enum": [ "integer", "number" ] }
  }
}"#,
    ),
    (
        "fixedAttribute",
        r#"{
  "allof": [ "$attribute" ],
  "/emits": {
    "/enum": "%values"
  }
}"#,
    ),
    (
        "nominalAttribute",
        r#"{
  "allof": [ "$attribute" ],
  "/emits": {
    "/enum": { "$array": { "allItems": "%allItems" } }
  }
}"#,
    ),
    (
        "atomicAttribute",
        r#"{
  "allof": [ "$attribute" ],
  "/emits": {
    "/type": { "enum": [ "integer", "number", "boolean", "string" ] }
  }
}"#,
    ),
    (
        "richValueAttribute",
        r#"{
  "allof": [ "$attribute" ],
  "/emits": { "$richValueSchema" : { "mediaType": "%mediaType" } }
}"#,
    ),
];

fn table() -> &'static [(&'static str, SchemaTemplate)] {
    static TABLE: OnceLock<Vec<(&'static str, SchemaTemplate)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        SOURCES
            .iter()
            .map(|(name, text)| {
                let body = parse_json(text).expect("predefined schema is valid JSON");
                let template = SchemaTemplate::new(body).expect("predefined template is valid");
                (*name, template)
            })
            .collect()
    })
}

/// Names in publication order.
pub fn names() -> impl Iterator<Item = &'static str> {
    SOURCES.iter().map(|(name, _)| *name)
}

pub fn get(name: &str) -> Option<&'static SchemaTemplate> {
    table().iter().find(|(n, _)| *n == name).map(|(_, t)| t)
}
