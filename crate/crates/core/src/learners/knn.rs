//! k-nearest-neighbour classification over atomic feature vectors.
//!
//! Distance is squared Euclidean over numeric features; any other feature
//! contributes 0 when equal and 1 otherwise. Every point tied with the k-th
//! distance joins the vote. A tied vote goes to the label owning the nearest
//! voting point, the lower stored index breaking equal distances.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use super::{schema, Learner, Model, TaskInput, Trained};
use crate::client::with_query;
use crate::error::Error;
use crate::value::{Mapping, Value};

pub const TASK_SCHEMA: &str = r#"{
  "?k": { "$integer": { "default": 1, "min": 1,
    "description": "The number of nearest neighbours to examine" } },
  "/resources": {
    "/target": { "$nominalAttribute": { "allItems": "$string" } },
    "/source": { "$arrayAttribute": { "allItems": "$atomicValueSchema" } }
  }
}"#;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<(Vec<Value>, String)>,
    /// Labels known at training time, sorted.
    pub labels: Vec<String>,
}

pub fn distance(a: &[Value], b: &[Value]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => (x - y) * (x - y),
            _ if x.loosely_equals(y) => 0.0,
            _ => 1.0,
        })
        .sum()
}

impl KnnModel {
    pub fn new(k: usize, points: Vec<(Vec<Value>, String)>) -> Result<Self, Error> {
        if k == 0 {
            return Err(Error::bad_request("k must be at least 1"));
        }
        if points.is_empty() {
            return Err(Error::bad_request("cannot train on zero instances"));
        }
        let arity = points[0].0.len();
        if let Some((i, _)) = points
            .iter()
            .enumerate()
            .find(|(_, (x, _))| x.len() != arity)
        {
            return Err(Error::bad_request(format!(
                "instance {} has a different number of features than instance 1",
                i + 1
            )));
        }
        if points.iter().flat_map(|(x, _)| x).any(|f| !f.is_atomic()) {
            return Err(Error::bad_request("features must be atomic values"));
        }
        let mut labels: Vec<String> = points.iter().map(|(_, l)| l.clone()).collect();
        labels.sort();
        labels.dedup();
        Ok(KnnModel { k, points, labels })
    }

    pub fn arity(&self) -> usize {
        self.points[0].0.len()
    }

    pub fn classify(&self, x: &[Value]) -> Result<&str, Error> {
        if x.len() != self.arity() {
            return Err(Error::bad_request(format!(
                "expected {} features, got {}",
                self.arity(),
                x.len()
            )));
        }
        let mut ranked: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (distance(p, x), i))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let kth = ranked[self.k.min(ranked.len()) - 1].0;
        let voters = ranked.iter().take_while(|(d, _)| *d <= kth);

        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut order: Vec<&str> = Vec::new();
        for &(_, i) in voters {
            let label = self.points[i].1.as_str();
            let c = counts.entry(label).or_insert(0);
            if *c == 0 {
                order.push(label);
            }
            *c += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        // `order` lists labels by their nearest voter, so the first label
        // with the top count wins ties.
        Ok(order
            .into_iter()
            .find(|l| counts[l] == best)
            .expect("at least one voter"))
    }

    pub fn to_value(&self) -> Value {
        let mut m = Mapping::new();
        m.insert("k".into(), Value::Integer(self.k as i64));
        m.insert(
            "labels".into(),
            Value::Array(self.labels.iter().map(|l| l.as_str().into()).collect()),
        );
        m.insert(
            "points".into(),
            Value::Array(
                self.points
                    .iter()
                    .map(|(x, l)| Value::Array(vec![Value::Array(x.clone()), l.as_str().into()]))
                    .collect(),
            ),
        );
        Value::Object(m)
    }

    pub fn from_value(v: &Value) -> Result<Self, Error> {
        let bad = || Error::Internal("corrupt k-NN snapshot".into());
        let k = v.get("k").and_then(Value::as_i64).ok_or_else(bad)? as usize;
        let labels = v
            .get("labels")
            .and_then(Value::as_array)
            .ok_or_else(bad)?
            .iter()
            .map(|l| l.as_str().map(str::to_string).ok_or_else(bad))
            .collect::<Result<Vec<_>, _>>()?;
        let points = v
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(bad)?
            .iter()
            .map(|p| match p.as_array().map(Vec::as_slice) {
                Some([Value::Array(x), Value::String(l)]) => Ok((x.clone(), l.clone())),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = KnnModel::new(k, points).map_err(|_| bad())?;
        model.labels = labels;
        Ok(model)
    }
}

impl Model for KnnModel {
    fn predict(&self, input: &Value) -> Result<Value, Error> {
        let x = input
            .as_array()
            .ok_or_else(|| Error::bad_request("expected an array of features"))?;
        Ok(self.classify(x)?.into())
    }

    fn update(&self, values: &[Value]) -> Result<Arc<dyn Model>, Error> {
        let mut next = self.clone();
        for v in values {
            let source = v.get("source").and_then(Value::as_array);
            let target = v.get("target").and_then(Value::as_str);
            let (Some(source), Some(target)) = (source, target) else {
                return Err(Error::bad_request("update values need source and target"));
            };
            if source.len() != self.arity() {
                return Err(Error::bad_request(format!(
                    "expected {} features, got {}",
                    self.arity(),
                    source.len()
                )));
            }
            if !self.labels.iter().any(|l| l == target) {
                return Err(Error::bad_request(format!("unknown label {target:?}")));
            }
            next.points.push((source.clone(), target.to_string()));
        }
        Ok(Arc::new(next))
    }

    fn snapshot(&self) -> Value {
        self.to_value()
    }
}

pub struct Knn {
    delay: Option<Duration>,
}

impl Knn {
    pub fn new() -> Self {
        Knn { delay: None }
    }

    /// Same learner, but the predictor only becomes available after `delay`.
    pub fn delayed(delay: Duration) -> Self {
        Knn { delay: Some(delay) }
    }
}

impl Default for Knn {
    fn default() -> Self {
        Self::new()
    }
}

fn last_segment(uri: &str) -> &str {
    let path = uri.split(['?', '#']).next().unwrap_or(uri);
    path.trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or(path)
}

fn value_list(
    fetch: &dyn Fn(&str) -> Result<Value, Error>,
    uri: &str,
) -> Result<Vec<Value>, Error> {
    let response = fetch(&with_query(uri, "instance=all"))?;
    match response.get("valueList") {
        Some(Value::Array(values)) => Ok(values.clone()),
        _ => Err(Error::bad_request(format!(
            "{uri} did not return a valueList"
        ))),
    }
}

impl Learner for Knn {
    fn description(&self) -> String {
        let base = "A k-nearest neighbour algorithm that takes feature vectors as input";
        match self.delay {
            None => base.to_string(),
            Some(d) => format!("{base} (publishes predictors after {} ms)", d.as_millis()),
        }
    }

    fn task_schema(&self) -> Value {
        schema(TASK_SCHEMA)
    }

    fn train(&self, input: &TaskInput<'_>) -> Result<Trained, Error> {
        let k = input.task.get("k").and_then(Value::as_i64).unwrap_or(1);
        let k = usize::try_from(k).map_err(|_| Error::bad_request("k must be at least 1"))?;
        let resource = |name: &str| {
            input
                .resources
                .get(name)
                .ok_or_else(|| Error::bad_request(format!("task has no {name} resource")))
        };
        let source = resource("source")?;
        let target = resource("target")?;
        let uri_of = |r: &Value| {
            r.get("uri")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| Error::bad_request("resource representation has no uri"))
        };
        let (source_uri, target_uri) = (uri_of(source)?, uri_of(target)?);
        let relation = source.get("relation").and_then(Value::as_str).unwrap_or("");
        if target.get("relation").and_then(Value::as_str) != Some(relation) {
            return Err(Error::bad_request(
                "source and target attributes must belong to the same relation",
            ));
        }

        let features = value_list(input.fetch, &source_uri)?;
        let labels = value_list(input.fetch, &target_uri)?;
        if features.len() != labels.len() {
            return Err(Error::Internal(format!(
                "source has {} values but target has {}",
                features.len(),
                labels.len()
            )));
        }
        let points = features
            .into_iter()
            .zip(labels)
            .map(|(x, l)| match (x, l) {
                (Value::Array(x), Value::String(l)) => Ok((x, l)),
                _ => Err(Error::bad_request(
                    "features must be arrays and labels strings",
                )),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let model = KnnModel::new(k, points)?;

        let accepts = source.get("emits").cloned().unwrap_or(Value::Bool(true));
        let mut enum_args = Mapping::new();
        enum_args.insert(
            "enum".into(),
            Value::Array(model.labels.iter().map(|l| l.as_str().into()).collect()),
        );
        let mut emits = Mapping::new();
        emits.insert("$string".into(), Value::Object(enum_args));
        let emits = Value::Object(emits);
        let mut update = Mapping::new();
        update.insert("/target".into(), emits.clone());
        update.insert("/source".into(), accepts.clone());

        let tag = last_segment(relation).to_string();
        Ok(Trained {
            model: Arc::new(model),
            accepts,
            emits,
            update_schema: Some(Value::Object(update)),
            description: format!("kNN trained predictor (trained on {tag})"),
            tag,
        })
    }

    fn training_delay(&self) -> Option<Duration> {
        self.delay
    }

    fn restore(&self, snapshot: &Value) -> Result<Arc<dyn Model>, Error> {
        Ok(Arc::new(KnnModel::from_value(snapshot)?))
    }
}
