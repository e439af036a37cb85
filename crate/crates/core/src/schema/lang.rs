use crate::schema::SchemaError;
use crate::value::{Mapping, Value};

/// Classification of a property key inside a schema object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintKey {
    /// `/K`
    Mandatory(String),
    /// `?K`
    Optional(String),
    /// `/K=`
    MandatoryValue(String),
    /// `?K=`
    OptionalValue(String),
    /// `/*`
    AdditionalProperties,
    /// `#K`
    LocalDefinition(String),
    /// `$R`, a parameterised reference
    Reference(String),
    /// Anything else: `type`, `minimum`, `allItems`, `$ref`, ...
    Keyword(String),
}

impl ConstraintKey {
    /// Property name for the four property-constraint forms.
    pub fn property_name(&self) -> Option<&str> {
        match self {
            ConstraintKey::Mandatory(n)
            | ConstraintKey::Optional(n)
            | ConstraintKey::MandatoryValue(n)
            | ConstraintKey::OptionalValue(n) => Some(n),
            _ => None,
        }
    }
}

pub fn classify_key(key: &str) -> Result<ConstraintKey, SchemaError> {
    if key == "/*" {
        return Ok(ConstraintKey::AdditionalProperties);
    }
    if key == "$ref" || key == "$schema" {
        return Ok(ConstraintKey::Keyword(key.to_string()));
    }
    let nonempty = |name: &str| {
        if name.is_empty() {
            Err(SchemaError::Malformed(format!(
                "key {key:?} has an empty name"
            )))
        } else {
            Ok(name.to_string())
        }
    };
    if let Some(address) = key.strip_prefix('$') {
        return Ok(ConstraintKey::Reference(nonempty(address)?));
    }
    if let Some(name) = key.strip_prefix('#') {
        return Ok(ConstraintKey::LocalDefinition(nonempty(name)?));
    }
    let (mandatory, rest) = match (key.strip_prefix('/'), key.strip_prefix('?')) {
        (Some(rest), _) => (true, rest),
        (_, Some(rest)) => (false, rest),
        _ => return Ok(ConstraintKey::Keyword(key.to_string())),
    };
    Ok(match (mandatory, rest.strip_suffix('=')) {
        (true, Some(name)) => ConstraintKey::MandatoryValue(nonempty(name)?),
        (false, Some(name)) => ConstraintKey::OptionalValue(nonempty(name)?),
        (true, None) => ConstraintKey::Mandatory(nonempty(rest)?),
        (false, None) => ConstraintKey::Optional(nonempty(rest)?),
    })
}

/// Media type of a rich-type string `@T`.
pub fn parse_rich_type(s: &str) -> Result<&str, SchemaError> {
    match s.strip_prefix('@') {
        Some(t) if !t.is_empty() => Ok(t),
        Some(_) => Err(SchemaError::Malformed(
            "rich type '@' has no media type".into(),
        )),
        None => Err(SchemaError::Malformed(format!("{s:?} is not a rich type"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub address: String,
    pub params: Option<Mapping>,
}

impl Reference {
    pub fn new(address: impl Into<String>) -> Self {
        Reference {
            address: address.into(),
            params: None,
        }
    }

    pub fn with_params(address: impl Into<String>, params: Mapping) -> Self {
        Reference {
            address: address.into(),
            params: Some(params),
        }
    }

    /// Parses a `$R` string.
    pub fn parse(s: &str) -> Option<Self> {
        s.strip_prefix('$')
            .filter(|a| !a.is_empty())
            .map(Reference::new)
    }

    pub fn scope(&self) -> Scope {
        if has_uri_scheme(&self.address) {
            Scope::Global
        } else {
            Scope::Local
        }
    }
}

/// True when `s` starts with an RFC 3986 scheme followed by `:`.
pub fn has_uri_scheme(s: &str) -> bool {
    let Some((scheme, _)) = s.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
}

/// `{"type":"array","items":[S1,…,Sn]}`
pub fn compose_array(schemas: Vec<Value>) -> Value {
    let mut m = Mapping::new();
    m.insert("type".into(), "array".into());
    m.insert("items".into(), Value::Array(schemas));
    Value::Object(m)
}

/// `{"/K1":S1,…,"/Kn":Sn}`
pub fn compose_object(keys: &[String], schemas: Vec<Value>) -> Result<Value, SchemaError> {
    if keys.len() != schemas.len() {
        return Err(SchemaError::Malformed(format!(
            "{} keys for {} schemas",
            keys.len(),
            schemas.len()
        )));
    }
    let mut m = Mapping::new();
    for (key, schema) in keys.iter().zip(schemas) {
        if !is_legal_property_name(key) {
            return Err(SchemaError::Malformed(format!(
                "{key:?} cannot be used as a property name"
            )));
        }
        if m.insert(format!("/{key}"), schema).is_some() {
            return Err(SchemaError::DuplicateKey(key.clone()));
        }
    }
    Ok(Value::Object(m))
}

/// Property names may not start with `/` or `?` nor end with `=` or `*`.
pub fn is_legal_property_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('/')
        && !name.starts_with('?')
        && !name.ends_with('=')
        && !name.ends_with('*')
}
