//! The wire protocol, independent of any HTTP server: requests are routed
//! to resources by URI and method, and results mapped to status codes.

use std::collections::HashSet;
use std::sync::Arc;

use crate::error::Error;
use crate::fold::FoldQuery;
use crate::query::decode_query;
use crate::resource::ops::{joined_uri, split_query, Applied, Selector};
use crate::resource::{
    decode_chain, Attribute, Collection, LearnerEntry, Link, Predictor, Relation, Service,
    TaskOutcome, Transformer,
};
use crate::schema::predefined;
use crate::value::{parse_json, Mapping, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub method: String,
    /// Absolute URI including any query.
    pub uri: String,
    pub body: Option<Vec<u8>>,
}

impl Request {
    pub fn new(method: &str, uri: &str, body: Option<Vec<u8>>) -> Self {
        Request {
            method: method.to_ascii_uppercase(),
            uri: uri.to_string(),
            body,
        }
    }

    pub fn get(uri: &str) -> Self {
        Self::new("GET", uri, None)
    }

    pub fn post(uri: &str, body: &Value) -> Self {
        Self::new("POST", uri, Some(crate::serialize_json(body).into_bytes()))
    }

    pub fn delete(uri: &str) -> Self {
        Self::new("DELETE", uri, None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    pub status: u16,
    pub location: Option<String>,
    /// Allowed methods, sent with 405.
    pub allow: Option<String>,
    pub body: Option<Value>,
}

impl Response {
    fn ok(body: Value) -> Self {
        Response {
            status: 200,
            location: None,
            allow: None,
            body: Some(body),
        }
    }

    fn empty(status: u16) -> Self {
        Response {
            status,
            location: None,
            allow: None,
            body: None,
        }
    }

    fn redirect(status: u16, location: String) -> Self {
        Response {
            status,
            location: Some(location),
            allow: None,
            body: None,
        }
    }

    fn error(e: &Error) -> Self {
        Response {
            status: e.status(),
            location: None,
            allow: None,
            body: Some(e.body()),
        }
    }
}

enum Target {
    Service,
    Collection(Collection),
    Schema(String),
    Relation(Arc<Relation>),
    Attribute(Arc<Attribute>),
    Transformer(Arc<Transformer>),
    Learner(Arc<LearnerEntry>),
    Predictor(Arc<Predictor>),
    Update(Arc<Predictor>),
}

impl Target {
    fn methods(&self) -> &'static [&'static str] {
        match self {
            Target::Service | Target::Collection(_) | Target::Schema(_) => &["GET", "HEAD"],
            Target::Relation(_)
            | Target::Transformer(_)
            | Target::Learner(_)
            | Target::Update(_) => &["GET", "HEAD", "POST"],
            Target::Attribute(_) | Target::Predictor(_) => &["GET", "HEAD", "POST", "DELETE"],
        }
    }
}

/// Decoded query arguments; unknown or repeated names are rejected.
struct Args(Vec<(String, String)>);

impl Args {
    fn parse(query: &str) -> Result<Args, Error> {
        let pairs =
            decode_query(query).map_err(|e| Error::bad_request(format!("bad query: {e}")))?;
        let mut seen = HashSet::new();
        for (k, _) in &pairs {
            if !seen.insert(k.as_str()) {
                return Err(Error::bad_request(format!(
                    "query argument {k} is repeated"
                )));
            }
        }
        Ok(Args(pairs))
    }

    fn allow(&self, names: &[&str]) -> Result<(), Error> {
        match self.0.iter().find(|(k, _)| !names.contains(&k.as_str())) {
            None => Ok(()),
            Some((k, _)) => Err(Error::bad_request(format!(
                "unsupported query argument {k}"
            ))),
        }
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    fn fold(&self) -> Result<Option<FoldQuery>, Error> {
        FoldQuery::from_args(self.get("fold"), self.get("numfolds"), self.get("invert"))
    }

    fn chain(&self) -> Result<Vec<Link>, Error> {
        self.get("t").map_or(Ok(Vec::new()), decode_chain)
    }
}

/// A `value=` argument: JSON when it parses, otherwise the raw text.
pub fn parse_request_value(raw: &str) -> Value {
    parse_json(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn parse_selector(raw: &str) -> Result<Selector, Error> {
    if raw == "all" {
        return Ok(Selector::All);
    }
    raw.parse::<usize>()
        .ok()
        .filter(|i| *i >= 1)
        .map(Selector::Index)
        .ok_or_else(|| {
            Error::bad_request(format!(
                "instance must be a positive integer or all, got {raw:?}"
            ))
        })
}

fn body_json(req: &Request) -> Result<Value, Error> {
    let bytes = req
        .body
        .as_deref()
        .filter(|b| !b.is_empty())
        .ok_or_else(|| Error::bad_request("request body is required"))?;
    let text =
        std::str::from_utf8(bytes).map_err(|_| Error::bad_request("request body is not UTF-8"))?;
    parse_json(text).map_err(|e| Error::bad_request(format!("request body is not valid JSON: {e}")))
}

fn psi_type(body: &Value) -> Option<&str> {
    body.get("psiType").and_then(Value::as_str)
}

fn string_field(body: &Value, name: &str) -> Result<Option<String>, Error> {
    match body.get(name) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(Error::bad_request(format!("{name} must be a string"))),
    }
}

struct Composition {
    join: String,
    description: Option<String>,
}

fn composition(body: &Value) -> Result<Composition, Error> {
    if psi_type(body) != Some("composition") {
        return Err(Error::bad_request(
            "a join request has psiType \"composition\"",
        ));
    }
    let join = string_field(body, "join")?
        .ok_or_else(|| Error::bad_request("join request has no join URI"))?;
    Ok(Composition {
        join,
        description: string_field(body, "description")?,
    })
}

impl Service {
    /// Answers one request. Never panics on client input.
    pub fn handle(&self, req: &Request) -> Response {
        let head = req.method == "HEAD";
        let mut response = match self.dispatch(req) {
            Ok(r) => r,
            Err(e) => Response::error(&e),
        };
        tracing::debug!(method = %req.method, uri = %req.uri, status = response.status, "handled");
        if head {
            response.body = None;
        }
        response
    }

    fn resolve(&self, base: &str) -> Option<Target> {
        let path = base.strip_prefix(self.base_uri())?;
        let base = if path == "/" {
            self.base_uri()
        } else {
            base.trim_end_matches('/')
        };
        if base == self.base_uri() {
            return Some(Target::Service);
        }
        for c in Collection::ALL {
            if base == self.collection_uri(c) {
                return self.is_exposed(c).then_some(Target::Collection(c));
            }
        }
        let schema_root = format!("{}/", self.collection_uri(Collection::Schema));
        if let Some(name) = base.strip_prefix(&schema_root) {
            if predefined::get(name).is_some() {
                return Some(Target::Schema(name.to_string()));
            }
        }
        let reg = self.read();
        if let Some(r) = reg.relations.get(base) {
            return Some(Target::Relation(r.clone()));
        }
        if let Some(a) = reg.attributes.get(base) {
            return Some(Target::Attribute(a.clone()));
        }
        if let Some(t) = reg.transformers.get(base) {
            return Some(Target::Transformer(t.clone()));
        }
        if let Some(l) = reg.learners.get(base) {
            return Some(Target::Learner(l.clone()));
        }
        if let Some(p) = reg.predictors.get(base) {
            return Some(Target::Predictor(p.clone()));
        }
        if let Some(p) = base
            .strip_suffix("/update")
            .and_then(|p| reg.predictors.get(p))
        {
            return Some(Target::Update(p.clone()));
        }
        None
    }

    fn dispatch(&self, req: &Request) -> Result<Response, Error> {
        let (base, query) = split_query(&req.uri);
        let target = self
            .resolve(base)
            .ok_or_else(|| Error::NotFound(format!("no resource at {base}")))?;
        let methods = target.methods();
        if !methods.contains(&req.method.as_str()) {
            let mut r = Response::error(&Error::MethodNotAllowed(format!(
                "{} is not supported by {base}",
                req.method
            )));
            r.allow = Some(methods.join(", "));
            return Ok(r);
        }
        let args = Args::parse(query)?;
        let method = if req.method == "HEAD" {
            "GET"
        } else {
            req.method.as_str()
        };
        match (target, method) {
            (Target::Service, _) => {
                args.allow(&[])?;
                Ok(Response::ok(self.service_description()))
            }
            (Target::Collection(c), _) => {
                args.allow(&[])?;
                Ok(Response::ok(self.list_collection(c)))
            }
            (Target::Schema(name), _) => {
                let template = match args.get("template") {
                    None | Some("false") => false,
                    Some("true") => true,
                    Some(other) => {
                        return Err(Error::bad_request(format!(
                            "template must be true or false, got {other:?}"
                        )))
                    }
                };
                let params: Mapping = args
                    .0
                    .iter()
                    .filter(|(k, _)| k != "template")
                    .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                    .collect();
                if template && !params.is_empty() {
                    return Err(Error::bad_request("template=true takes no other arguments"));
                }
                let body = self
                    .schema_body(&name, &params, template)
                    .ok_or_else(|| Error::NotFound(format!("no schema {name}")))?;
                Ok(Response::ok(body))
            }
            (Target::Relation(rel), "GET") => {
                args.allow(&["fold", "numfolds", "invert"])?;
                Ok(Response::ok(
                    self.relation_repr(&rel, args.fold()?.as_ref())?,
                ))
            }
            (Target::Relation(rel), _) => {
                args.allow(&[])?;
                let body = body_json(req)?;
                if psi_type(&body) != Some("attribute-definition") {
                    return Err(Error::bad_request(
                        "a create request has psiType \"attribute-definition\"",
                    ));
                }
                let definition = body.get("attribute").ok_or_else(|| {
                    Error::bad_request("create request has no attribute definition")
                })?;
                let created = self.create_attribute(
                    &rel.uri,
                    definition,
                    string_field(&body, "description")?,
                    None,
                )?;
                Ok(Response::redirect(201, created.uri))
            }
            (Target::Attribute(a), "GET") => {
                args.allow(&["instance", "fold", "numfolds", "invert", "t"])?;
                let fold = args.fold()?;
                let chain = args.chain()?;
                let join_desc = self.registered_join(&a.uri, &chain)?;
                match args.get("instance") {
                    None => Ok(Response::ok(self.attribute_repr(
                        &a,
                        fold.as_ref(),
                        &chain,
                        join_desc,
                    )?)),
                    Some(raw) => {
                        let applied =
                            self.apply_attribute(&a, parse_selector(raw)?, fold.as_ref(), &chain)?;
                        Ok(Response::ok(value_message(applied)))
                    }
                }
            }
            (Target::Attribute(a), "POST") => {
                args.allow(&["fold", "numfolds", "invert", "t"])?;
                let chain = args.chain()?;
                self.registered_join(&a.uri, &chain)?;
                let c = composition(&body_json(req)?)?;
                let created = self.join(&a.uri, &a.emits, &chain, &c.join, c.description)?;
                Ok(Response::redirect(
                    if created.existed { 302 } else { 201 },
                    created.uri,
                ))
            }
            (Target::Attribute(a), _) => {
                args.allow(&["t"])?;
                let chain = args.chain()?;
                if chain.is_empty() {
                    self.delete_attribute(&a.uri)?;
                } else {
                    self.registered_join(&a.uri, &chain)?;
                    self.delete_join(&joined_uri(&a.uri, &chain))?;
                }
                Ok(Response::empty(200))
            }
            (Target::Transformer(t), "GET") => {
                args.allow(&["value", "t"])?;
                let chain = args.chain()?;
                let join_desc = self.registered_join(&t.uri, &chain)?;
                match args.get("value") {
                    None => Ok(Response::ok(self.transformer_repr(&t, &chain, join_desc))),
                    Some(raw) => {
                        let v = self.apply_local_transformer(&t, &parse_request_value(raw))?;
                        Ok(Response::ok(single_value(self.apply_chain(v, &chain)?)))
                    }
                }
            }
            (Target::Transformer(t), _) => {
                args.allow(&["t"])?;
                let chain = args.chain()?;
                self.registered_join(&t.uri, &chain)?;
                let c = composition(&body_json(req)?)?;
                let emits = t.emits.clone();
                let created = self.join(&t.uri, &emits, &chain, &c.join, c.description)?;
                Ok(Response::redirect(
                    if created.existed { 302 } else { 201 },
                    created.uri,
                ))
            }
            (Target::Learner(l), "GET") => {
                args.allow(&[])?;
                Ok(Response::ok(self.learner_repr(&l)))
            }
            (Target::Learner(l), _) => {
                args.allow(&[])?;
                match self.process_task(&l, &body_json(req)?)? {
                    TaskOutcome::Created(uri) => Ok(Response::redirect(201, uri)),
                    TaskOutcome::Accepted(uri) => Ok(Response::redirect(202, uri)),
                }
            }
            (Target::Predictor(p), "GET") => {
                args.allow(&["value", "t"])?;
                let chain = args.chain()?;
                let join_desc = self.registered_join(&p.uri, &chain)?;
                match args.get("value") {
                    None => Ok(Response::ok(self.predictor_repr(&p, &chain, join_desc))),
                    Some(raw) => {
                        let v = self.apply_predictor(&p, &parse_request_value(raw))?;
                        Ok(Response::ok(single_value(self.apply_chain(v, &chain)?)))
                    }
                }
            }
            (Target::Predictor(p), "POST") => {
                args.allow(&["t"])?;
                let r = self.ready(&p)?;
                let chain = args.chain()?;
                self.registered_join(&p.uri, &chain)?;
                let c = composition(&body_json(req)?)?;
                let created = self.join(&p.uri, &r.emits, &chain, &c.join, c.description)?;
                Ok(Response::redirect(
                    if created.existed { 302 } else { 201 },
                    created.uri,
                ))
            }
            (Target::Predictor(p), _) => {
                args.allow(&["t"])?;
                self.ready(&p)?;
                let chain = args.chain()?;
                if chain.is_empty() {
                    self.delete_predictor(&p)?;
                } else {
                    self.registered_join(&p.uri, &chain)?;
                    self.delete_join(&joined_uri(&p.uri, &chain))?;
                }
                Ok(Response::empty(200))
            }
            (Target::Update(p), "GET") => {
                args.allow(&[])?;
                Ok(Response::ok(self.update_schema(&p)?))
            }
            (Target::Update(p), _) => {
                args.allow(&[])?;
                let created = self.update_predictor(&p, &body_json(req)?)?;
                Ok(Response::redirect(
                    if created.existed { 303 } else { 201 },
                    created.uri,
                ))
            }
        }
    }
}

fn single_value(v: Value) -> Value {
    let mut m = Mapping::new();
    m.insert("psiType".into(), "value".into());
    m.insert("value".into(), v);
    Value::Object(m)
}

fn value_message(applied: Applied) -> Value {
    match applied {
        Applied::One(v) => single_value(v),
        Applied::All(vs) => {
            let mut m = Mapping::new();
            m.insert("psiType".into(), "value".into());
            m.insert("valueList".into(), Value::Array(vs));
            Value::Object(m)
        }
    }
}
