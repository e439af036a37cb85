//! Built-in transformers.

use std::sync::Arc;

use super::schema;
use crate::value::Value;

pub type TransformFn = Arc<dyn Fn(&Value) -> Result<Value, String> + Send + Sync>;

pub struct BuiltinTransform {
    pub description: &'static str,
    pub accepts: Value,
    pub emits: Value,
    pub func: TransformFn,
}

pub fn builtin_transform(name: &str) -> Option<BuiltinTransform> {
    match name {
        "square" => Some(BuiltinTransform {
            description: "Calculates the square of a number",
            accepts: "$number".into(),
            emits: "$number".into(),
            func: Arc::new(|v| {
                let x = v.as_f64().ok_or("expected a number")?;
                Ok(Value::Number(square(x)))
            }),
        }),
        "average" => Some(BuiltinTransform {
            description: "Calculates the arithmetic mean of a non-empty array of numbers",
            accepts: schema(r#"{ "$array": { "allItems": "$number" }, "minItems": 1 }"#),
            emits: "$number".into(),
            func: Arc::new(|v| {
                let xs = v
                    .as_array()
                    .ok_or("expected an array")?
                    .iter()
                    .map(|x| x.as_f64().ok_or("expected numbers"))
                    .collect::<Result<Vec<_>, _>>()?;
                average(&xs)
                    .map(Value::Number)
                    .ok_or_else(|| "expected at least one number".into())
            }),
        }),
        _ => None,
    }
}

pub fn square(x: f64) -> f64 {
    x * x
}

pub fn average(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}
