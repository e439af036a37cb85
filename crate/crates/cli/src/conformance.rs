//! Replays the Iris walkthrough against a live service over HTTP.
//!
//! Only the entry URI is known up front; every other URI is discovered from
//! response bodies and Location headers.

use std::fmt;
use std::time::Duration;

use psi_core::datauri::parse_data_uri;
use psi_core::schema::validator::{validate_rich, OfflineResolver};
use psi_core::{parse_json, serialize_json, Value};

const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub name: String,
    pub request: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConformanceReport {
    pub steps: Vec<Step>,
}

impl ConformanceReport {
    pub fn passed(&self) -> usize {
        self.steps.iter().filter(|s| s.pass).count()
    }

    pub fn failed(&self) -> usize {
        self.steps.len() - self.passed()
    }

    pub fn ok(&self) -> bool {
        !self.steps.is_empty() && self.failed() == 0
    }

    pub fn step(&self, name: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.name == name)
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            if s.pass {
                writeln!(f, "PASS {:<22} {}", s.name, s.request)?;
            } else {
                writeln!(f, "FAIL {:<22} {}", s.name, s.request)?;
                writeln!(f, "     expected: {}", s.expected)?;
                writeln!(f, "     actual:   {}", s.actual)?;
            }
        }
        write!(f, "{} passed, {} failed", self.passed(), self.failed())
    }
}

/// Where the second, retailer-side service for the cross-relation step lives.
#[derive(Debug, Clone, Default)]
pub enum Partner {
    /// Entry URI of an already running data-only service.
    Uri(String),
    /// Start one in-process from this config file.
    Config(std::path::PathBuf),
    /// Skip the cross-relation step (recorded as a failure).
    #[default]
    None,
}

#[derive(Debug, Clone)]
struct Reply {
    status: u16,
    location: Option<String>,
    body: Option<Value>,
}

/// A step aborted because something it depends on is missing.
struct Abort(String);

impl<E: fmt::Display> From<E> for Abort {
    fn from(e: E) -> Self {
        Abort(e.to_string())
    }
}

type Flow<T> = Result<T, Abort>;

struct Harness {
    agent: ureq::Agent,
    report: ConformanceReport,
}

fn show(v: &Value) -> String {
    serialize_json(v)
}

fn close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(p, q))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| close(v, w)))
        }
        _ => match (a.as_f64(), b.as_f64()) {
            (Some(p), Some(q)) => (p - q).abs() <= TOLERANCE,
            _ => a == b,
        },
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Flow<&'a Value> {
    v.get(key)
        .ok_or_else(|| Abort(format!("response has no {key}")))
}

fn field_str<'a>(v: &'a Value, key: &str) -> Flow<&'a str> {
    field(v, key)?
        .as_str()
        .ok_or_else(|| Abort(format!("{key} is not a string")))
}

fn uris(v: &Value) -> Vec<String> {
    v.get("resources")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(|u| u.as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

fn last_segment(uri: &str) -> &str {
    let path = uri.split('?').next().unwrap_or(uri);
    path.rsplit('/').next().unwrap_or(path)
}

fn with_query(uri: &str, q: &str) -> String {
    psi_core::client::with_query(uri, q)
}

fn encode(v: &Value) -> String {
    url::form_urlencoded::byte_serialize(serialize_json(v).as_bytes()).collect()
}

impl Harness {
    fn new() -> Self {
        Harness {
            agent: ureq::Agent::config_builder()
                .http_status_as_error(false)
                .max_redirects(0)
                .timeout_global(Some(Duration::from_secs(30)))
                .build()
                .into(),
            report: ConformanceReport::default(),
        }
    }

    fn send(&self, method: &str, uri: &str, body: Option<&Value>) -> Flow<Reply> {
        let result = match (method, body) {
            ("GET", _) => self.agent.get(uri).call(),
            ("DELETE", _) => self.agent.delete(uri).call(),
            ("POST", Some(b)) => self
                .agent
                .post(uri)
                .header("Content-Type", "application/json")
                .send(serialize_json(b)),
            _ => return Err(Abort(format!("unsupported request {method}"))),
        };
        let mut resp = result.map_err(|e| Abort(format!("{method} {uri}: {e}")))?;
        let status = resp.status().as_u16();
        let location = resp
            .headers()
            .get("location")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let text = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| Abort(format!("{method} {uri}: {e}")))?;
        let body = if text.trim().is_empty() {
            None
        } else {
            Some(parse_json(&text).map_err(|e| Abort(format!("{method} {uri}: bad JSON: {e}")))?)
        };
        Ok(Reply {
            status,
            location,
            body,
        })
    }

    fn record(&mut self, name: &str, request: &str, expected: String, actual: String, pass: bool) {
        self.report.steps.push(Step {
            name: name.into(),
            request: request.into(),
            expected,
            actual,
            pass,
        });
    }

    /// Records `expected` vs `actual` (numbers compared with tolerance).
    fn expect(
        &mut self,
        name: &str,
        request: &str,
        expected: &Value,
        actual: Option<&Value>,
    ) -> bool {
        let pass = actual.is_some_and(|a| close(expected, a));
        let shown = actual.map(show).unwrap_or_else(|| "(missing)".into());
        self.record(name, request, show(expected), shown, pass);
        pass
    }

    fn expect_status(&mut self, name: &str, request: &str, expected: u16, reply: &Reply) -> bool {
        self.expect_status_in(name, request, &[expected], reply)
    }

    fn expect_status_in(
        &mut self,
        name: &str,
        request: &str,
        expected: &[u16],
        reply: &Reply,
    ) -> bool {
        let pass = expected.contains(&reply.status);
        let actual = match &reply.body {
            Some(b) if !pass => format!("{} {}", reply.status, show(b)),
            _ => reply.status.to_string(),
        };
        let expected: Vec<String> = expected.iter().map(u16::to_string).collect();
        self.record(name, request, expected.join(" or "), actual, pass);
        pass
    }

    /// GET that must answer 200 with a body.
    fn fetch(&mut self, name: &str, uri: &str) -> Flow<Value> {
        let reply = self.send("GET", uri, None)?;
        let req = format!("GET {uri}");
        if !self.expect_status(name, &req, 200, &reply) {
            return Err(Abort(format!("{req} answered {}", reply.status)));
        }
        reply
            .body
            .ok_or_else(|| Abort(format!("{req} had no body")))
    }

    /// Runs a section; an abort is recorded as a failed step.
    fn section<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Flow<T>) -> Option<T> {
        match f(self) {
            Ok(v) => Some(v),
            Err(Abort(why)) => {
                self.record(name, "(section)", "completed".into(), why, false);
                None
            }
        }
    }
}

/// URIs discovered so far.
#[derive(Default)]
struct Found {
    relation: Option<String>,
    flower: Option<Value>,
    transformers: Vec<String>,
    learners: Vec<String>,
    created: Option<String>,
    predictor: Option<String>,
    predictor_emits: Option<Value>,
}

pub fn run(entry: &str, partner: &Partner) -> ConformanceReport {
    let mut h = Harness::new();
    let mut found = Found::default();

    h.section("discovery", |h| discovery(h, entry, &mut found));
    if found.relation.is_some() {
        h.section("relation", |h| relation(h, &mut found));
        h.section("folds", |h| folds(h, &found));
    }
    h.section("transformers", |h| transformers(h, &found));
    h.section("learner", |h| learner(h, &found));
    if found.flower.is_some() {
        h.section("create-attribute", |h| create_attribute(h, &mut found));
    }
    if found.created.is_some() {
        h.section("train", |h| train(h, &mut found));
    }
    if found.predictor.is_some() {
        h.section("predict", |h| predict(h, &found));
        h.section("update", |h| update(h, &found));
        h.section("cross-relation", |h| cross_relation(h, &found, partner));
    }
    if found.relation.is_some() {
        h.section("rich-values", |h| rich_values(h, &found));
    }
    if found.created.is_some() {
        h.section("delete-attribute", |h| delete_attribute(h, &found));
    }
    h.report
}

fn discovery(h: &mut Harness, entry: &str, found: &mut Found) -> Flow<()> {
    let svc = h.fetch("entry", entry)?;
    h.expect(
        "entry-type",
        &format!("GET {entry}"),
        &Value::from("service"),
        svc.get("psiType"),
    );
    let relations = h.fetch("relations-list", field_str(&svc, "relations")?)?;
    // The Iris relation is the one with 150 instances.
    for uri in uris(&relations) {
        let rel = h.fetch("relation-get", &uri)?;
        if rel.get("size") == Some(&Value::Integer(150)) {
            found.relation = Some(uri);
            break;
        }
    }
    let req = "relations with size 150";
    h.record(
        "relation-found",
        req,
        "a relation".into(),
        found.relation.clone().unwrap_or_else(|| "(none)".into()),
        found.relation.is_some(),
    );
    if let Some(t) = svc.get("transformers").and_then(Value::as_str) {
        found.transformers = uris(&h.fetch("transformers-list", t)?);
    }
    if let Some(l) = svc.get("learners").and_then(Value::as_str) {
        found.learners = uris(&h.fetch("learners-list", l)?);
    }
    Ok(())
}

fn relation(h: &mut Harness, found: &mut Found) -> Flow<()> {
    let rel_uri = found.relation.clone().expect("checked");
    let rel = h.fetch("relation", &rel_uri)?;
    h.expect(
        "relation-size",
        &format!("GET {rel_uri}"),
        &Value::Integer(150),
        rel.get("size"),
    );
    let flower_uri = field_str(&rel, "defaultAttribute")?.to_string();
    let flower = h.fetch("default-attribute", &flower_uri)?;
    h.expect(
        "flower-emits",
        &format!("GET {flower_uri}"),
        &parse_json(
            r#"{"/sepal":{"/length":"$number","/width":"$number"},"/petal":{"/length":"$number","/width":"$number"},"/species":{"$string":{"enum":["setosa","versicolor","virginica"]}}}"#,
        )?,
        flower.get("emits"),
    );
    let first = with_query(&flower_uri, "instance=1");
    let v = h.fetch("instance-1", &first)?;
    h.expect(
        "instance-1-value",
        &format!("GET {first}"),
        &parse_json(r#"{"sepal":{"length":5.1,"width":3.5},"petal":{"length":1.4,"width":0.2},"species":"setosa"}"#)?,
        v.get("value"),
    );
    let species = field_str(field(&flower, "subattributes")?, "species")?.to_string();
    let all = with_query(&species, "instance=all");
    let list = h.fetch("species-all", &all)?;
    let values = field(&list, "valueList")?
        .as_array()
        .cloned()
        .unwrap_or_default();
    let req = format!("GET {all}");
    h.expect(
        "species-count",
        &req,
        &Value::Integer(150),
        Some(&Value::Integer(values.len() as i64)),
    );
    h.expect(
        "species-first",
        &req,
        &Value::from("setosa"),
        values.first(),
    );
    h.expect(
        "species-last",
        &req,
        &Value::from("virginica"),
        values.last(),
    );
    found.flower = Some(flower);
    Ok(())
}

fn folds(h: &mut Harness, found: &Found) -> Flow<()> {
    let rel_uri = found.relation.as_deref().expect("checked");
    let folded_uri = with_query(rel_uri, "fold=2&numfolds=5");
    let folded = h.fetch("fold-relation", &folded_uri)?;
    h.expect(
        "fold-size",
        &format!("GET {folded_uri}"),
        &Value::Integer(30),
        folded.get("size"),
    );
    let default = field_str(&folded, "defaultAttribute")?;
    let first = with_query(default, "instance=1");
    let v = h.fetch("fold-instance-1", &first)?;
    h.expect(
        "fold-instance-1-sepal",
        &format!("GET {first}"),
        &parse_json(r#"{"length":4.9,"width":3.0}"#)?,
        v.get("value").and_then(|v| v.get("sepal")),
    );
    Ok(())
}

fn named<'a>(list: &'a [String], name: &str) -> Flow<&'a str> {
    list.iter()
        .map(String::as_str)
        .find(|u| last_segment(u) == name)
        .ok_or_else(|| Abort(format!("no {name} resource advertised")))
}

fn transformers(h: &mut Harness, found: &Found) -> Flow<()> {
    let square = named(&found.transformers, "square")?.to_string();
    let repr = h.fetch("square", &square)?;
    h.expect(
        "square-type",
        &format!("GET {square}"),
        &Value::from("transformer"),
        repr.get("psiType"),
    );
    let apply = with_query(&square, "value=4");
    let v = h.fetch("square-apply", &apply)?;
    h.expect(
        "square-4",
        &format!("GET {apply}"),
        &Value::Number(16.0),
        v.get("value"),
    );

    let Some(flower) = &found.flower else {
        return Err(Abort("default attribute not found".into()));
    };
    let sepal = h.fetch(
        "sepal",
        field_str(field(flower, "subattributes")?, "sepal")?,
    )?;
    let length = field_str(field(&sepal, "subattributes")?, "length")?.to_string();
    let join = Value::Object(
        [
            ("psiType".to_string(), Value::from("composition")),
            ("join".to_string(), Value::from(square.as_str())),
        ]
        .into_iter()
        .collect(),
    );
    let req = format!("POST {length} join square");
    let reply = h.send("POST", &length, Some(&join))?;
    // 302 when an earlier run against the same service made this join.
    h.expect_status_in("join-square", &req, &[201, 302], &reply);
    let joined = reply
        .location
        .ok_or_else(|| Abort("join had no Location".into()))?;
    let again = h.send("POST", &length, Some(&join))?;
    h.expect_status("join-square-again", &req, 302, &again);
    h.expect(
        "join-square-again-location",
        &req,
        &Value::from(joined.as_str()),
        again.location.map(Value::from).as_ref(),
    );
    let all = with_query(&joined, "instance=all");
    let list = h.fetch("squared-all", &all)?;
    let values = field(&list, "valueList")?
        .as_array()
        .cloned()
        .unwrap_or_default();
    let req = format!("GET {all}");
    let prefix: Vec<Value> = values.iter().take(3).cloned().collect();
    h.expect(
        "squared-prefix",
        &req,
        &parse_json("[26.01,24.01,22.09]")?,
        Some(&Value::Array(prefix)),
    );
    let suffix: Vec<Value> = values
        .iter()
        .skip(values.len().saturating_sub(2))
        .cloned()
        .collect();
    h.expect(
        "squared-suffix",
        &req,
        &parse_json("[38.44,34.81]")?,
        Some(&Value::Array(suffix)),
    );
    Ok(())
}

fn learner(h: &mut Harness, found: &Found) -> Flow<()> {
    let knn = named(&found.learners, "knn")?.to_string();
    let repr = h.fetch("knn-learner", &knn)?;
    let req = format!("GET {knn}");
    h.expect(
        "knn-type",
        &req,
        &Value::from("learner"),
        repr.get("psiType"),
    );
    // PSI form: an optional `?k` property holding `{"$integer": {"default": …}}`.
    let k_default = repr
        .get("taskSchema")
        .and_then(|s| s.get("?k"))
        .and_then(|k| k.get("$integer"))
        .and_then(|k| k.get("default"));
    h.expect("knn-k-default", &req, &Value::Integer(1), k_default);
    Ok(())
}

fn create_attribute(h: &mut Harness, found: &mut Found) -> Flow<()> {
    let rel_uri = found.relation.clone().expect("checked");
    let flower = found.flower.clone().expect("checked");
    let subs = field(&flower, "subattributes")?;
    let mut leaves = Vec::new();
    for part in ["sepal", "petal"] {
        let a = h.fetch(&format!("{part}-attribute"), field_str(subs, part)?)?;
        for dim in ["length", "width"] {
            leaves.push(Value::from(field_str(field(&a, "subattributes")?, dim)?));
        }
    }
    let body = Value::Object(
        [
            ("psiType".to_string(), Value::from("attribute-definition")),
            (
                "description".to_string(),
                Value::from("A feature vector representation of iris dimensions"),
            ),
            ("attribute".to_string(), Value::Array(leaves)),
        ]
        .into_iter()
        .collect(),
    );
    let req = format!("POST {rel_uri} attribute-definition");
    let reply = h.send("POST", &rel_uri, Some(&body))?;
    h.expect_status("create-attribute", &req, 201, &reply);
    let created = reply
        .location
        .ok_or_else(|| Abort("creation had no Location".into()))?;
    let repr = h.fetch("created-attribute", &created)?;
    h.expect(
        "created-emits",
        &format!("GET {created}"),
        &parse_json(r#"{"type":"array","items":["$number","$number","$number","$number"]}"#)?,
        repr.get("emits"),
    );
    found.created = Some(created);
    Ok(())
}

fn task(k: Option<i64>, source: &str, target: &str) -> Value {
    let mut t = psi_core::Mapping::new();
    if let Some(k) = k {
        t.insert("k".into(), Value::Integer(k));
    }
    let resources: psi_core::Mapping = [
        ("source".to_string(), Value::from(format!("${source}"))),
        ("target".to_string(), Value::from(format!("${target}"))),
    ]
    .into_iter()
    .collect();
    t.insert("resources".into(), Value::Object(resources));
    [
        ("psiType".to_string(), Value::from("task")),
        ("task".to_string(), Value::Object(t)),
    ]
    .into_iter()
    .collect::<psi_core::Mapping>()
    .into()
}

fn species_uri(found: &Found) -> Flow<String> {
    let flower = found
        .flower
        .as_ref()
        .ok_or_else(|| Abort("no default attribute".into()))?;
    Ok(field_str(field(flower, "subattributes")?, "species")?.to_string())
}

fn train(h: &mut Harness, found: &mut Found) -> Flow<()> {
    let knn = named(&found.learners, "knn")?.to_string();
    let body = task(
        Some(3),
        found.created.as_deref().expect("checked"),
        &species_uri(found)?,
    );
    let req = format!("POST {knn} task k=3");
    let reply = h.send("POST", &knn, Some(&body))?;
    h.expect_status("train", &req, 201, &reply);
    let predictor = reply
        .location
        .ok_or_else(|| Abort("training had no Location".into()))?;
    let repr = h.fetch("predictor", &predictor)?;
    let req = format!("GET {predictor}");
    h.expect(
        "predictor-type",
        &req,
        &Value::from("transformer"),
        repr.get("psiType"),
    );
    h.expect(
        "predictor-task",
        &req,
        field(&body, "task")?,
        repr.get("provenance").and_then(|p| p.get("task")),
    );
    h.expect(
        "predictor-learner",
        &req,
        &Value::from(knn.as_str()),
        repr.get("provenance").and_then(|p| p.get("learner")),
    );
    found.predictor_emits = repr.get("emits").cloned();
    found.predictor = Some(predictor);
    Ok(())
}

fn predict_at(
    h: &mut Harness,
    name: &str,
    predictor: &str,
    point: &str,
    expected: &str,
) -> Flow<()> {
    let uri = with_query(predictor, &format!("value={}", encode(&parse_json(point)?)));
    let v = h.fetch(&format!("{name}-get"), &uri)?;
    h.expect(
        name,
        &format!("GET {uri}"),
        &Value::from(expected),
        v.get("value"),
    );
    Ok(())
}

fn predict(h: &mut Harness, found: &Found) -> Flow<()> {
    let p = found.predictor.as_deref().expect("checked");
    predict_at(h, "predict", p, "[6.1,2.1,4.1,1.7]", "versicolor")
}

fn update_body(point: &str, target: &str) -> Flow<Value> {
    Ok(parse_json(&format!(
        r#"{{"psiType":"value","value":{{"target":"{target}","source":{point}}}}}"#
    ))?)
}

fn update(h: &mut Harness, found: &Found) -> Flow<()> {
    let predictor = found.predictor.clone().expect("checked");
    let repr = h.fetch("predictor-before-update", &predictor)?;
    let update = field_str(&repr, "update")?.to_string();
    h.fetch("update-schema", &update)?;
    let point = "[6.4,3.1,6.5,2.1]";
    let reply = h.send("POST", &update, Some(&update_body(point, "virginica")?))?;
    let req = format!("POST {update}");
    h.expect_status("update", &req, 303, &reply);
    h.expect(
        "update-location",
        &req,
        &Value::from(predictor.as_str()),
        reply.location.map(Value::from).as_ref(),
    );
    let after = h.fetch("predictor-after-update", &predictor)?;
    let updated = after.get("provenance").and_then(|p| p.get("updated"));
    h.record(
        "provenance-updated",
        &format!("GET {predictor}"),
        "an updated timestamp".into(),
        updated.map(show).unwrap_or_else(|| "(missing)".into()),
        updated.is_some(),
    );
    predict_at(h, "predict-updated", &predictor, point, "virginica")?;

    // With k omitted (default 1) the updated point is its own nearest neighbour.
    let knn = named(&found.learners, "knn")?.to_string();
    let body = task(
        None,
        found.created.as_deref().expect("checked"),
        &species_uri(found)?,
    );
    let reply = h.send("POST", &knn, Some(&body))?;
    h.expect_status(
        "train-k1",
        &format!("POST {knn} task without k"),
        201,
        &reply,
    );
    let k1 = reply
        .location
        .ok_or_else(|| Abort("training had no Location".into()))?;
    let k1_update = field_str(&h.fetch("k1-predictor", &k1)?, "update")?.to_string();
    let reply = h.send("POST", &k1_update, Some(&update_body(point, "virginica")?))?;
    h.expect_status("update-k1", &format!("POST {k1_update}"), 303, &reply);
    predict_at(h, "predict-updated-k1", &k1, point, "virginica")?;
    let reply = h.send("DELETE", &k1, None)?;
    h.expect_status("delete-predictor", &format!("DELETE {k1}"), 200, &reply);
    let reply = h.send("GET", &k1, None)?;
    h.expect_status("deleted-predictor-gone", &format!("GET {k1}"), 404, &reply);
    Ok(())
}

fn cross_relation(h: &mut Harness, found: &Found, partner: &Partner) -> Flow<()> {
    let entry = match partner {
        Partner::Uri(u) => u.clone(),
        Partner::Config(path) => {
            let (mut cfg, dir) = psi_core::config::ServiceConfig::load(path)?;
            cfg.address = "127.0.0.1:0".into();
            cfg.base_uri = None;
            cfg.persistence = None;
            psi_server::spawn(&cfg, &dir)?
        }
        Partner::None => return Err(Abort("no partner service configured".into())),
    };
    let predictor = found.predictor.as_deref().expect("checked");
    let svc = h.fetch("partner-entry", &entry)?;
    let relations = uris(&h.fetch("partner-relations", field_str(&svc, "relations")?)?);
    let rel_uri = relations
        .first()
        .ok_or_else(|| Abort("partner has no relations".into()))?;
    let rel = h.fetch("partner-relation", rel_uri)?;
    let dimensions = field_str(&rel, "defaultAttribute")?.to_string();
    let body = parse_json(&format!(
        r#"{{"psiType":"composition","join":"{predictor}","description":"Predicted iris species"}}"#
    ))?;
    let req = format!("POST {dimensions} join predictor");
    let reply = h.send("POST", &dimensions, Some(&body))?;
    h.expect_status("predictive-attribute", &req, 201, &reply);
    let joined = reply
        .location
        .ok_or_else(|| Abort("join had no Location".into()))?;
    let repr = h.fetch("predictive-attribute-get", &joined)?;
    if let Some(emits) = &found.predictor_emits {
        h.expect(
            "predictive-emits",
            &format!("GET {joined}"),
            emits,
            repr.get("emits"),
        );
    }
    let all = with_query(&joined, "instance=all");
    let list = h.fetch("predictive-all", &all)?;
    let size = rel.get("size").cloned().unwrap_or(Value::Integer(-1));
    let values = field(&list, "valueList")?
        .as_array()
        .cloned()
        .unwrap_or_default();
    h.expect(
        "predictive-count",
        &format!("GET {all}"),
        &size,
        Some(&Value::Integer(values.len() as i64)),
    );
    let species = ["setosa", "versicolor", "virginica"];
    let stray: Vec<&Value> = values
        .iter()
        .filter(|v| !v.as_str().is_some_and(|s| species.contains(&s)))
        .collect();
    h.record(
        "predictive-labels",
        &format!("GET {all}"),
        "every value a species".into(),
        if stray.is_empty() {
            "ok".into()
        } else {
            format!("{stray:?}")
        },
        stray.is_empty(),
    );
    Ok(())
}

fn rich_values(h: &mut Harness, found: &Found) -> Flow<()> {
    let rel_uri = found.relation.as_deref().expect("checked");
    let rel = h.fetch("relation-rich", rel_uri)?;
    let mut image = None;
    for uri in field(&rel, "attributes")?
        .as_array()
        .cloned()
        .unwrap_or_default()
    {
        let Some(uri) = uri.as_str() else { continue };
        let a = h.fetch(&format!("attribute-{}", last_segment(uri)), uri)?;
        if serialize_json(field(&a, "emits")?).contains("image/jpeg") {
            image = Some(uri.to_string());
            break;
        }
    }
    let image = image.ok_or_else(|| Abort("no image attribute".into()))?;
    let first = with_query(&image, "instance=1");
    let v = h.fetch("image-instance-1", &first)?;
    let value = field(&v, "value")?.clone();
    let req = format!("GET {first}");
    let media = value
        .as_str()
        .and_then(|s| parse_data_uri(s).ok())
        .map(|d| d.media_type);
    h.expect(
        "image-data-uri",
        &req,
        &Value::from("image/jpeg"),
        media.map(Value::from).as_ref(),
    );
    let outcome = validate_rich(&value, "image/jpeg", &OfflineResolver);
    h.record(
        "image-validates",
        &req,
        "valid".into(),
        outcome.summary(),
        outcome.is_valid(),
    );
    let wrong = validate_rich(&value, "image/png", &OfflineResolver);
    h.record(
        "image-wrong-type",
        &req,
        "invalid as image/png".into(),
        if wrong.is_valid() {
            "valid".into()
        } else {
            "invalid".into()
        },
        !wrong.is_valid(),
    );
    Ok(())
}

fn delete_attribute(h: &mut Harness, found: &Found) -> Flow<()> {
    let created = found.created.as_deref().expect("checked");
    let reply = h.send("DELETE", created, None)?;
    h.expect_status(
        "delete-attribute",
        &format!("DELETE {created}"),
        200,
        &reply,
    );
    let reply = h.send("DELETE", created, None)?;
    h.expect_status(
        "delete-attribute-again",
        &format!("DELETE {created}"),
        404,
        &reply,
    );
    if let Some(flower) = found
        .flower
        .as_ref()
        .and_then(|f| f.get("uri"))
        .and_then(Value::as_str)
    {
        let reply = h.send("DELETE", flower, None)?;
        h.expect_status(
            "delete-default-forbidden",
            &format!("DELETE {flower}"),
            403,
            &reply,
        );
    }
    Ok(())
}
