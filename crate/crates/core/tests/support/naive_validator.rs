//! A deliberately plain constraint interpreter over `serde_json::Value`, plus
//! a generator of (value, compiled schema) pairs to compare it against.
//!
//! Semantics it encodes: integers are numbers without a fractional part;
//! numeric comparisons ignore the integer/number split; a positional `items`
//! list fixes the array length; a non-object schema is a constant.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Map, Value as J};

fn num(v: &J) -> Option<f64> {
    v.as_f64()
}

fn same(a: &J, b: &J) -> bool {
    match (a, b) {
        (J::Number(x), J::Number(y)) => x.as_f64() == y.as_f64(),
        (J::Array(x), J::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same(p, q))
        }
        (J::Object(x), J::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| same(v, w)))
        }
        _ => a == b,
    }
}

fn has_type(v: &J, t: &str) -> bool {
    match t {
        "integer" => num(v).is_some_and(|x| x.fract() == 0.0),
        "number" => v.is_number(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "array" => v.is_array(),
        "object" => v.is_object(),
        _ => false,
    }
}

pub fn valid(v: &J, s: &J) -> bool {
    let m = match s {
        J::Object(m) => m,
        J::Bool(b) => return *b,
        J::Array(_) => return false,
        other => return same(v, other),
    };
    if let Some(t) = m.get("type") {
        let ok = match t {
            J::String(t) => has_type(v, t),
            J::Array(ts) => ts
                .iter()
                .any(|t| t.as_str().is_some_and(|t| has_type(v, t))),
            _ => false,
        };
        if !ok {
            return false;
        }
    }
    if let Some(x) = num(v) {
        if m.get("minimum").and_then(num).is_some_and(|lo| x < lo) {
            return false;
        }
        if m.get("maximum").and_then(num).is_some_and(|hi| x > hi) {
            return false;
        }
    }
    if let Some(J::Array(options)) = m.get("enum") {
        if !options.iter().any(|o| same(o, v)) {
            return false;
        }
    }
    if let Some(J::Array(all)) = m.get("allOf") {
        if !all.iter().all(|sub| valid(v, sub)) {
            return false;
        }
    }
    if let Some(J::Array(one)) = m.get("oneOf") {
        if one.iter().filter(|sub| valid(v, sub)).count() != 1 {
            return false;
        }
    }
    if let J::Array(items) = v {
        let n = items.len() as u64;
        if m.get("minItems")
            .and_then(J::as_u64)
            .is_some_and(|lo| n < lo)
        {
            return false;
        }
        if m.get("maxItems")
            .and_then(J::as_u64)
            .is_some_and(|hi| n > hi)
        {
            return false;
        }
        let items_ok = match m.get("items") {
            Some(J::Array(each)) => {
                each.len() == items.len() && items.iter().zip(each).all(|(i, s)| valid(i, s))
            }
            Some(sub) => items.iter().all(|i| valid(i, sub)),
            None => true,
        };
        if !items_ok {
            return false;
        }
    }
    if let J::Object(obj) = v {
        if let Some(J::Array(req)) = m.get("required") {
            if req
                .iter()
                .any(|r| r.as_str().is_some_and(|r| !obj.contains_key(r)))
            {
                return false;
            }
        }
        let props = m.get("properties").and_then(J::as_object);
        for (k, x) in obj {
            let sub = props
                .and_then(|p| p.get(k))
                .or_else(|| m.get("additionalProperties"));
            if sub.is_some_and(|sub| !valid(x, sub)) {
                return false;
            }
        }
    }
    true
}

const NAMES: [&str; 4] = ["a", "b", "c", "d"];
const WORDS: [&str; 4] = ["setosa", "versicolor", "virginica", "rose"];

fn small_number<R: Rng>(rng: &mut R) -> J {
    match rng.gen_range(0..4) {
        0 => json!(rng.gen_range(-5i64..=5)),
        1 => json!(rng.gen_range(-5i64..=5) as f64),
        2 => json!(rng.gen_range(-50i64..=50) as f64 / 10.0),
        _ => json!(rng.gen_range(-5i64..=5) as f64 + 0.5),
    }
}

fn atom<R: Rng>(rng: &mut R) -> J {
    match rng.gen_range(0..4) {
        0 | 1 => small_number(rng),
        2 => json!(*WORDS.choose(rng).unwrap()),
        _ => json!(rng.gen_bool(0.5)),
    }
}

/// A random compiled schema of nesting depth at most `depth`.
pub fn schema<R: Rng>(rng: &mut R, depth: u32) -> J {
    let leaf = depth == 0;
    match rng.gen_range(0..if leaf { 6 } else { 11 }) {
        0 => json!({"type": *["integer", "number", "string", "boolean"].choose(rng).unwrap()}),
        1 => {
            let mut m = Map::new();
            m.insert(
                "type".into(),
                json!(*["integer", "number"].choose(rng).unwrap()),
            );
            if rng.gen_bool(0.6) {
                m.insert("minimum".into(), small_number(rng));
            }
            if rng.gen_bool(0.6) {
                m.insert("maximum".into(), small_number(rng));
            }
            J::Object(m)
        }
        2 => {
            let n = rng.gen_range(1..4);
            json!({"enum": (0..n).map(|_| atom(rng)).collect::<Vec<_>>()})
        }
        3 => json!({"type": ["integer", "number", "boolean", "string"]}),
        4 => atom(rng),
        5 => json!({"minimum": small_number(rng)}),
        6 => {
            let mut m = Map::new();
            m.insert("type".into(), json!("array"));
            if rng.gen_bool(0.5) {
                let n = rng.gen_range(0..4);
                m.insert(
                    "items".into(),
                    J::Array((0..n).map(|_| schema(rng, depth - 1)).collect()),
                );
            } else {
                m.insert("items".into(), schema(rng, depth - 1));
                if rng.gen_bool(0.5) {
                    let size = rng.gen_range(0..4);
                    m.insert("minItems".into(), json!(size));
                    m.insert("maxItems".into(), json!(size + rng.gen_range(0..2)));
                }
            }
            J::Object(m)
        }
        7 => {
            let mut props = Map::new();
            let mut required = Vec::new();
            for name in NAMES.iter().take(rng.gen_range(0..4)) {
                props.insert(name.to_string(), schema(rng, depth - 1));
                if rng.gen_bool(0.6) {
                    required.push(json!(name));
                }
            }
            let mut m = Map::new();
            m.insert("type".into(), json!("object"));
            m.insert("properties".into(), J::Object(props));
            if !required.is_empty() {
                m.insert("required".into(), J::Array(required));
            }
            match rng.gen_range(0..3) {
                0 => {
                    m.insert("additionalProperties".into(), json!(false));
                }
                1 => {
                    m.insert("additionalProperties".into(), schema(rng, depth - 1));
                }
                _ => {}
            }
            J::Object(m)
        }
        8 => {
            json!({"allOf": (0..rng.gen_range(1..3)).map(|_| schema(rng, depth - 1)).collect::<Vec<_>>()})
        }
        9 => {
            json!({"oneOf": (0..rng.gen_range(1..4)).map(|_| schema(rng, depth - 1)).collect::<Vec<_>>()})
        }
        _ => {
            let mut props = Map::new();
            props.insert("a".into(), schema(rng, depth - 1));
            json!({"type": "object", "properties": props, "additionalProperties": schema(rng, depth - 1)})
        }
    }
}

/// A random value, biased towards the shapes `schema` talks about.
pub fn value_for<R: Rng>(rng: &mut R, s: &J, depth: u32) -> J {
    if depth == 0 || rng.gen_bool(0.15) {
        return atom(rng);
    }
    let Some(m) = s.as_object() else {
        return if rng.gen_bool(0.7) {
            s.clone()
        } else {
            atom(rng)
        };
    };
    if let Some(J::Array(options)) = m.get("enum") {
        if rng.gen_bool(0.7) {
            return options.choose(rng).unwrap().clone();
        }
    }
    for key in ["allOf", "oneOf"] {
        if let Some(J::Array(subs)) = m.get(key) {
            if let Some(sub) = subs.choose(rng) {
                return value_for(rng, sub, depth);
            }
        }
    }
    match m.get("type").and_then(J::as_str) {
        Some("array") => match m.get("items") {
            Some(J::Array(each)) => {
                let mut out: Vec<J> = each
                    .iter()
                    .map(|sub| value_for(rng, sub, depth - 1))
                    .collect();
                if rng.gen_bool(0.2) {
                    out.push(atom(rng));
                }
                J::Array(out)
            }
            Some(sub) => J::Array(
                (0..rng.gen_range(0..5))
                    .map(|_| value_for(rng, sub, depth - 1))
                    .collect(),
            ),
            None => J::Array(vec![]),
        },
        Some("object") => {
            let props = m
                .get("properties")
                .and_then(J::as_object)
                .cloned()
                .unwrap_or_default();
            let mut out = Map::new();
            for (k, sub) in &props {
                if rng.gen_bool(0.8) {
                    out.insert(k.clone(), value_for(rng, sub, depth - 1));
                }
            }
            if rng.gen_bool(0.3) {
                let extra = m.get("additionalProperties").cloned().unwrap_or(json!({}));
                out.insert("z".into(), value_for(rng, &extra, depth - 1));
            }
            J::Object(out)
        }
        _ => atom(rng),
    }
}
