//! Conservative proof that every value valid for one compiled schema is
//! valid for another. Anything not provable is reported as incompatible.

use crate::schema::validator::validate;
use crate::value::{Mapping, Value};

const ANNOTATIONS: [&str; 5] = ["$schema", "title", "description", "default", "$ref"];

const MAX_DEPTH: usize = 64;

/// `Ok` when `emits` ⊆ `accepts`; otherwise the first unprovable constraint.
pub fn check_compatibility(emits: &Value, accepts: &Value) -> Result<(), String> {
    implies(emits, accepts, 0)
}

fn strip_annotations(v: &Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.iter()
                .filter(|(k, _)| !ANNOTATIONS.contains(&k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        ),
        other => other.clone(),
    }
}

fn implies(e: &Value, a: &Value, depth: usize) -> Result<(), String> {
    if depth > MAX_DEPTH {
        return Err("schema nesting too deep to compare".into());
    }
    let a = strip_annotations(a);
    let e = strip_annotations(e);
    match (&e, &a) {
        (_, Value::Bool(true)) | (Value::Bool(false), _) => return Ok(()),
        (_, Value::Object(m)) if m.is_empty() => return Ok(()),
        _ => {}
    }
    if e.loosely_equals(&a) {
        return Ok(());
    }
    let e_map = match &e {
        Value::Object(m) => m,
        Value::Bool(true) => return Err("emits accepts any value".into()),
        constant => {
            return if validate(constant, &a).is_valid() {
                Ok(())
            } else {
                Err(format!("constant {constant} is not accepted"))
            };
        }
    };
    let Value::Object(a_map) = &a else {
        return Err(format!("cannot prove values are equal to {a}"));
    };

    // A finite enumeration is checked member by member.
    if let Some(Value::Array(members)) = e_map.get("enum") {
        if members.iter().all(|m| validate(m, &a).is_valid()) {
            return Ok(());
        }
    }
    if let Some(Value::Array(branches)) = e_map.get("oneOf") {
        if branches
            .iter()
            .all(|b| implies(&merge_into(e_map, "oneOf", b), &a, depth + 1).is_ok())
        {
            return Ok(());
        }
    }

    let sources = sources(e_map);
    for (keyword, arg) in a_map {
        let proved = sources
            .iter()
            .any(|s| proves_keyword(s, keyword, arg, a_map, depth).is_ok());
        if !proved {
            let why = sources
                .first()
                .map(|s| proves_keyword(s, keyword, arg, a_map, depth))
                .and_then(Result::err)
                .unwrap_or_default();
            return Err(format!("cannot prove constraint {keyword:?}: {why}"));
        }
    }
    Ok(())
}

/// `e` without its `oneOf`, with `branch`'s constraints layered in via allOf.
fn merge_into(e: &Mapping, drop: &str, branch: &Value) -> Value {
    let mut m: Mapping = e
        .iter()
        .filter(|(k, _)| k.as_str() != drop)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let mut all = match m.shift_remove("allOf") {
        Some(Value::Array(items)) => items,
        _ => Vec::new(),
    };
    all.push(branch.clone());
    m.insert("allOf".into(), Value::Array(all));
    Value::Object(m)
}

/// The schema itself plus every `allOf` branch (recursively): each is a
/// superset of the values `e` admits.
fn sources(e: &Mapping) -> Vec<Mapping> {
    let mut out = vec![e.clone()];
    if let Some(Value::Array(branches)) = e.get("allOf") {
        for b in branches {
            if let Value::Object(m) = strip_annotations(b) {
                out.extend(sources(&m));
            }
        }
    }
    out
}

fn type_set(v: &Value) -> Option<Vec<String>> {
    match v {
        Value::String(s) => Some(vec![s.clone()]),
        Value::Array(items) => items
            .iter()
            .map(|t| t.as_str().map(str::to_string))
            .collect(),
        _ => None,
    }
}

fn type_covered(t: &str, allowed: &[String]) -> bool {
    allowed.iter().any(|a| a == t) || (t == "integer" && allowed.iter().any(|a| a == "number"))
}

/// True when the source's `type` rules out every type in `kinds`.
fn excludes(source: &Mapping, kinds: &[&str]) -> bool {
    source.get("type").and_then(type_set).is_some_and(|types| {
        types
            .iter()
            .all(|t| !kinds.contains(&t.as_str()) && !(t == "integer" && kinds.contains(&"number")))
    })
}

fn enum_all(source: &Mapping, pred: impl Fn(&Value) -> bool) -> bool {
    matches!(source.get("enum"), Some(Value::Array(members)) if members.iter().all(pred))
}

fn proves_keyword(
    s: &Mapping,
    keyword: &str,
    arg: &Value,
    accepts: &Mapping,
    depth: usize,
) -> Result<(), String> {
    let fail = |why: String| Err(why);
    match keyword {
        k if ANNOTATIONS.contains(&k) => Ok(()),
        "type" => {
            let allowed = type_set(arg).ok_or("bad type argument")?;
            if let Some(types) = s.get("type").and_then(type_set) {
                if types.iter().all(|t| type_covered(t, &allowed)) {
                    return Ok(());
                }
                return fail(format!("type {types:?} is not within {allowed:?}"));
            }
            let single = Value::Object(Mapping::from_iter([("type".to_string(), arg.clone())]));
            if enum_all(s, |m| validate(m, &single).is_valid()) {
                return Ok(());
            }
            fail("emitted type is unconstrained".into())
        }
        "enum" => {
            let Value::Array(allowed) = arg else {
                return fail("bad enum argument".into());
            };
            if enum_all(s, |m| allowed.iter().any(|x| x.loosely_equals(m))) {
                return Ok(());
            }
            fail("emitted values are not limited to the accepted enumeration".into())
        }
        "minimum" | "maximum" => {
            let bound = arg.as_f64().ok_or("bad bound")?;
            let ok = |x: f64| {
                if keyword == "minimum" {
                    x >= bound
                } else {
                    x <= bound
                }
            };
            if excludes(s, &["number"]) {
                return Ok(());
            }
            if s.get(keyword).and_then(Value::as_f64).is_some_and(ok) {
                return Ok(());
            }
            if enum_all(s, |m| m.as_f64().is_none_or(ok)) {
                return Ok(());
            }
            fail(format!("emitted numbers may violate {keyword} {bound}"))
        }
        "minItems" | "maxItems" => {
            let bound = arg.as_i64().ok_or("bad bound")?;
            let ok = |n: i64| {
                if keyword == "minItems" {
                    n >= bound
                } else {
                    n <= bound
                }
            };
            if excludes(s, &["array"]) {
                return Ok(());
            }
            if s.get(keyword).and_then(Value::as_i64).is_some_and(ok) {
                return Ok(());
            }
            if let Some(Value::Array(positional)) = s.get("items") {
                if ok(positional.len() as i64) {
                    return Ok(());
                }
            }
            if enum_all(s, |m| m.as_array().is_none_or(|a| ok(a.len() as i64))) {
                return Ok(());
            }
            fail(format!("emitted arrays may violate {keyword} {bound}"))
        }
        "items" => {
            if excludes(s, &["array"]) {
                return Ok(());
            }
            match (s.get("items"), arg) {
                (Some(Value::Array(es)), Value::Array(as_)) => {
                    if es.len() != as_.len() {
                        return fail(format!("{} positional items vs {}", es.len(), as_.len()));
                    }
                    es.iter().zip(as_).enumerate().try_for_each(|(i, (e, a))| {
                        implies(e, a, depth + 1).map_err(|why| format!("item {i}: {why}"))
                    })
                }
                (Some(Value::Array(es)), a) => es.iter().enumerate().try_for_each(|(i, e)| {
                    implies(e, a, depth + 1).map_err(|why| format!("item {i}: {why}"))
                }),
                (Some(e), a) if !matches!(a, Value::Array(_)) => implies(e, a, depth + 1),
                _ => fail("emitted array items are unconstrained".into()),
            }
        }
        "required" => {
            if excludes(s, &["object"]) {
                return Ok(());
            }
            let have: Vec<&str> = match s.get("required") {
                Some(Value::Array(r)) => r.iter().filter_map(Value::as_str).collect(),
                _ => Vec::new(),
            };
            let Value::Array(need) = arg else {
                return fail("bad required argument".into());
            };
            match need
                .iter()
                .filter_map(Value::as_str)
                .find(|n| !have.contains(n))
            {
                None => Ok(()),
                Some(missing) => fail(format!("property {missing:?} may be absent")),
            }
        }
        "properties" => {
            if excludes(s, &["object"]) {
                return Ok(());
            }
            let Value::Object(wanted) = arg else {
                return fail("bad properties argument".into());
            };
            let have = s.get("properties").and_then(Value::as_object);
            for (k, a) in wanted {
                let e = have
                    .and_then(|p| p.get(k))
                    .or_else(|| s.get("additionalProperties"));
                match e {
                    Some(e) => {
                        implies(e, a, depth + 1).map_err(|why| format!("property {k:?}: {why}"))?
                    }
                    None => implies(&Value::Bool(true), a, depth + 1)
                        .map_err(|why| format!("property {k:?}: {why}"))?,
                }
            }
            Ok(())
        }
        "additionalProperties" => {
            if excludes(s, &["object"]) {
                return Ok(());
            }
            let named = accepts.get("properties").and_then(Value::as_object);
            if let Some(props) = s.get("properties").and_then(Value::as_object) {
                for (k, e) in props {
                    if named.is_some_and(|n| n.contains_key(k)) {
                        continue;
                    }
                    implies(e, arg, depth + 1).map_err(|why| format!("property {k:?}: {why}"))?;
                }
            }
            match s.get("additionalProperties") {
                Some(e) => implies(e, arg, depth + 1),
                None => implies(&Value::Bool(true), arg, depth + 1).map_err(|_| {
                    "emitted objects may carry arbitrary extra properties".to_string()
                }),
            }
        }
        "allOf" => {
            let Value::Array(branches) = arg else {
                return fail("bad allOf argument".into());
            };
            let whole = Value::Object(s.clone());
            branches
                .iter()
                .try_for_each(|b| implies(&whole, b, depth + 1))
        }
        "format" | "mediaType" => match (s.get(keyword), arg) {
            (Some(Value::String(x)), Value::String(y)) if x.eq_ignore_ascii_case(y) => Ok(()),
            _ => fail(format!("{keyword} {arg} is not guaranteed")),
        },
        "oneOf" => fail("cannot prove exclusive alternatives".into()),
        other => fail(format!("unsupported keyword {other:?}")),
    }
}
