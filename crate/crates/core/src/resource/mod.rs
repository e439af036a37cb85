//! The resource registry and the behaviour of every PSI resource kind.

mod chain;
pub mod ops;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock, Weak};

use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::Deserialize;

pub use chain::{decode_chain, encode_chain, Link};
pub use ops::{Applied, Created, Selector, TaskOutcome};

use crate::client::{NoNetwork, ResourceClient};
use crate::clock::{Clock, SystemClock};
use crate::error::Error;
use crate::ingest::{column_emits, AttrTree, IngestedRelation};
use crate::journal::{Event, Journal, JournalError};
use crate::learners::transforms::{BuiltinTransform, TransformFn};
use crate::learners::{Learner, Model};
use crate::query::percent_encode;
use crate::schema::compiler::{params_to_query, DRAFT_04_HYPER_SCHEMA};
use crate::schema::template::instantiate_template;
use crate::schema::validator::{validate_with_resolver, OfflineResolver};
use crate::schema::{
    compile_fragment, compose_array, compose_object, predefined, MediaTypeResolver,
    ResolutionContext, SchemaError, SchemaFetcher, ValidationOutcome,
};
use crate::value::{parse_json, serialize_json, Mapping, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Collection {
    Relations,
    Schema,
    Learners,
    Predictors,
    Transformers,
}

impl Collection {
    pub const ALL: [Collection; 5] = [
        Collection::Relations,
        Collection::Schema,
        Collection::Learners,
        Collection::Predictors,
        Collection::Transformers,
    ];

    /// Property name in the service representation.
    pub fn key(self) -> &'static str {
        match self {
            Collection::Relations => "relations",
            Collection::Schema => "schema",
            Collection::Learners => "learners",
            Collection::Predictors => "predictors",
            Collection::Transformers => "transformers",
        }
    }
}

/// Paths of the collection resources below the base URI.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Roots {
    pub relations: String,
    pub schema: String,
    pub learners: String,
    pub predictors: String,
    pub transformers: String,
}

impl Default for Roots {
    fn default() -> Self {
        Roots {
            relations: "/data".into(),
            schema: "/schema".into(),
            learners: "/learn".into(),
            predictors: "/infer".into(),
            transformers: "/transform".into(),
        }
    }
}

impl Roots {
    pub fn get(&self, c: Collection) -> &str {
        match c {
            Collection::Relations => &self.relations,
            Collection::Schema => &self.schema,
            Collection::Learners => &self.learners,
            Collection::Predictors => &self.predictors,
            Collection::Transformers => &self.transformers,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    /// Entry URI, without a trailing slash.
    pub base_uri: String,
    pub roots: Roots,
    /// Collections advertised by the entry representation.
    pub exposed: Vec<Collection>,
    pub related_services: Vec<Value>,
    /// Updates create a new predictor (201) instead of modifying in place (303).
    pub immutable_predictors: bool,
}

impl Settings {
    pub fn new(base_uri: &str) -> Self {
        Settings {
            base_uri: base_uri.trim_end_matches('/').to_string(),
            roots: Roots::default(),
            exposed: Collection::ALL.to_vec(),
            related_services: Vec::new(),
            immutable_predictors: false,
        }
    }
}

/// Everything a service needs from the outside world.
#[derive(Clone)]
pub struct Deps {
    pub client: Arc<dyn ResourceClient>,
    pub resolver: Arc<dyn MediaTypeResolver>,
    pub clock: Arc<dyn Clock>,
}

impl Default for Deps {
    fn default() -> Self {
        Deps {
            client: Arc::new(NoNetwork),
            resolver: Arc::new(OfflineResolver),
            clock: Arc::new(SystemClock),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Extractor {
    Column(usize),
    Array(Vec<Extractor>),
    Object(Vec<(String, Extractor)>),
    /// Values of `inner` passed through each transformer in turn.
    Joined {
        inner: Box<Extractor>,
        chain: Vec<String>,
    },
}

pub(crate) struct Relation {
    pub uri: String,
    pub description: Option<String>,
    pub rows: Arc<Vec<Vec<Value>>>,
    pub default_attribute: String,
    pub top_attributes: Vec<String>,
    pub query_schema: Option<Value>,
}

pub(crate) struct Attribute {
    pub uri: String,
    pub relation: String,
    pub description: Option<String>,
    pub emits: Value,
    pub extractor: Extractor,
    pub subattributes: Option<Value>,
    pub deletable: bool,
    pub definition_key: Option<String>,
}

pub(crate) struct Transformer {
    pub uri: String,
    pub description: String,
    pub accepts: Value,
    pub emits: Value,
    pub provenance: Option<Value>,
    pub func: TransformFn,
}

pub(crate) struct LearnerEntry {
    pub uri: String,
    pub kind: String,
    pub learner: Arc<dyn Learner>,
}

pub struct ReadyPredictor {
    pub description: String,
    pub accepts: Value,
    pub emits: Value,
    pub provenance: Mapping,
    pub model: Arc<dyn Model>,
    pub update_schema: Option<Value>,
}

pub(crate) enum PredictorState {
    Training {
        ready_at: DateTime<Utc>,
        started: DateTime<Utc>,
        result: Arc<ReadyPredictor>,
    },
    Ready(Arc<ReadyPredictor>),
}

pub(crate) struct Predictor {
    pub uri: String,
    pub learner_uri: Option<String>,
    /// Learner kind able to restore the model from a snapshot.
    pub learner_kind: String,
    pub tag: String,
    pub state: RwLock<PredictorState>,
}

#[derive(Default)]
pub(crate) struct Registry {
    pub relations: IndexMap<String, Arc<Relation>>,
    pub attributes: IndexMap<String, Arc<Attribute>>,
    pub definitions: HashMap<String, String>,
    pub transformers: IndexMap<String, Arc<Transformer>>,
    pub learners: IndexMap<String, Arc<LearnerEntry>>,
    pub predictors: IndexMap<String, Arc<Predictor>>,
    /// Registered join URIs (`…?t=…`) and their descriptions.
    pub joins: IndexMap<String, Option<String>>,
    pub next_derived: u64,
}

pub(crate) struct Inner {
    pub settings: Settings,
    pub deps: Deps,
    pub registry: RwLock<Registry>,
    pub journal: Mutex<Option<Journal>>,
    pub started: DateTime<Utc>,
}

/// A PSI service: the registry plus the behaviour of its resources.
/// Cloning is cheap and shares state.
#[derive(Clone)]
pub struct Service {
    pub(crate) inner: Arc<Inner>,
}

/// Non-owning handle, for clients that route back into a service.
#[derive(Clone)]
pub struct WeakService(Weak<Inner>);

impl WeakService {
    pub fn upgrade(&self) -> Option<Service> {
        self.0.upgrade().map(|inner| Service { inner })
    }
}

pub(crate) const FOLD_QUERY_SCHEMA: &str = r#"{
  "description": "Select subset 'fold' of 'numfolds' total subsets of instances. Use 'invert=true' to select every other fold.",
  "/fold": { "$integer": { "min": 1, "title": "Fold number", "description": "≤ number of folds" } },
  "/numfolds": { "$integer": { "min": 1, "title": "Total folds" } },
  "?invert": { "$boolean": { "title": "Invert selection" } }
}"#;

impl Service {
    pub fn new(settings: Settings, deps: Deps) -> Service {
        let started = deps.clock.now();
        Service {
            inner: Arc::new(Inner {
                settings,
                deps,
                registry: RwLock::new(Registry::default()),
                journal: Mutex::new(None),
                started,
            }),
        }
    }

    pub fn downgrade(&self) -> WeakService {
        WeakService(Arc::downgrade(&self.inner))
    }

    pub fn settings(&self) -> &Settings {
        &self.inner.settings
    }

    pub fn base_uri(&self) -> &str {
        &self.inner.settings.base_uri
    }

    pub fn collection_uri(&self, c: Collection) -> String {
        format!("{}{}", self.base_uri(), self.inner.settings.roots.get(c))
    }

    pub fn is_exposed(&self, c: Collection) -> bool {
        self.inner.settings.exposed.contains(&c)
    }

    pub(crate) fn now(&self) -> DateTime<Utc> {
        self.inner.deps.clock.now()
    }

    pub(crate) fn read(&self) -> std::sync::RwLockReadGuard<'_, Registry> {
        self.inner
            .registry
            .read()
            .unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn write(&self) -> std::sync::RwLockWriteGuard<'_, Registry> {
        self.inner
            .registry
            .write()
            .unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn record(&self, event: Event) {
        let mut journal = self.inner.journal.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(j) = journal.as_mut() {
            if let Err(e) = j.append(&event) {
                tracing::error!(error = %e, "journal write failed");
            }
        }
    }

    /// Opens the journal at `path`, replays it, and records later changes.
    pub fn open_journal(&self, path: &Path) -> Result<usize, JournalError> {
        let (journal, events) = Journal::open(path)?;
        let n = events.len();
        for event in events {
            if let Err(e) = self.replay(event) {
                tracing::warn!(error = %e, "skipping journal event that no longer applies");
            }
        }
        *self.inner.journal.lock().unwrap_or_else(|e| e.into_inner()) = Some(journal);
        tracing::info!(path = %path.display(), events = n, "journal replayed");
        Ok(n)
    }

    /// Registers an ingested relation with its attribute trees.
    pub fn add_relation(&self, rel: &IngestedRelation) -> Result<String, Error> {
        let uri = format!(
            "{}/{}",
            self.collection_uri(Collection::Relations),
            rel.name
        );
        let mut attributes = Vec::new();
        let mut top = Vec::new();
        for a in &rel.attributes {
            let attr_uri = format!("{uri}/{}", a.name);
            top.push(attr_uri.clone());
            register_tree(
                &mut attributes,
                rel,
                &uri,
                &attr_uri,
                a.description.clone(),
                &a.tree,
            )?;
        }
        let relation = Relation {
            uri: uri.clone(),
            description: rel.description.clone(),
            rows: Arc::new(rel.rows.clone()),
            default_attribute: format!("{uri}/{}", rel.default_attribute),
            top_attributes: top,
            query_schema: rel
                .folds
                .then(|| parse_json(FOLD_QUERY_SCHEMA).expect("valid")),
        };
        let mut reg = self.write();
        if reg.relations.contains_key(&uri) {
            return Err(Error::Internal(format!(
                "relation {uri} is already registered"
            )));
        }
        reg.relations.insert(uri.clone(), Arc::new(relation));
        for a in attributes {
            reg.attributes.insert(a.uri.clone(), Arc::new(a));
        }
        Ok(uri)
    }

    pub fn add_transformer(&self, name: &str, t: BuiltinTransform) -> String {
        let uri = format!("{}/{name}", self.collection_uri(Collection::Transformers));
        let mut provenance = Mapping::new();
        provenance.insert(
            "created".into(),
            crate::clock::iso_minutes(self.inner.started).into(),
        );
        provenance.insert("createdBy".into(), "system".into());
        let record = Transformer {
            uri: uri.clone(),
            description: t.description.to_string(),
            accepts: t.accepts,
            emits: t.emits,
            provenance: Some(Value::Object(provenance)),
            func: t.func,
        };
        self.write()
            .transformers
            .insert(uri.clone(), Arc::new(record));
        uri
    }

    pub fn add_learner(&self, name: &str, kind: &str, learner: Arc<dyn Learner>) -> String {
        let uri = format!("{}/{name}", self.collection_uri(Collection::Learners));
        let entry = LearnerEntry {
            uri: uri.clone(),
            kind: kind.to_string(),
            learner,
        };
        self.write().learners.insert(uri.clone(), Arc::new(entry));
        uri
    }

    /// Whether `uri` names a resource of this service.
    pub fn is_local(&self, uri: &str) -> bool {
        let base = self.base_uri();
        uri.strip_prefix(base)
            .is_some_and(|rest| rest.is_empty() || rest.starts_with('/') || rest.starts_with('?'))
    }

    /// GETs any resource: local URIs are routed in-process, others go
    /// through the client.
    pub fn get(&self, uri: &str) -> Result<Value, Error> {
        if self.is_local(uri) {
            let response = self.handle(&crate::http::Request::get(uri));
            return match (response.status, response.body) {
                (200, Some(body)) => Ok(body),
                (status, body) => Err(status_error(status, uri, body)),
            };
        }
        self.inner.deps.client.get(uri).map_err(|e| {
            let mut detail = Mapping::new();
            detail.insert("uri".into(), e.uri.as_str().into());
            if let Some(status) = e.status {
                detail.insert("status".into(), Value::Integer(status as i64));
            }
            Error::with_detail(e.to_string(), Value::Object(detail))
        })
    }

    /// Compiles a PSI schema in this service's resolution context.
    pub fn compile(&self, schema: &Value) -> Result<Value, Error> {
        let fetcher = ServiceSchemaFetcher { svc: self };
        let root = self.collection_uri(Collection::Schema);
        let mut ctx = ResolutionContext::new(&root, &fetcher);
        Ok(compile_fragment(schema, &mut ctx)?)
    }

    /// Compiles with the root `$schema` annotation.
    pub fn compile_document(&self, schema: &Value) -> Result<Value, Error> {
        Ok(match self.compile(schema)? {
            Value::Object(m) => {
                let mut out = Mapping::new();
                out.insert("$schema".into(), DRAFT_04_HYPER_SCHEMA.into());
                out.extend(m);
                Value::Object(out)
            }
            other => other,
        })
    }

    /// Validates against a PSI schema, checking rich values.
    pub fn validate(&self, value: &Value, schema: &Value) -> Result<ValidationOutcome, Error> {
        let compiled = self.compile(schema)?;
        Ok(validate_with_resolver(
            value,
            &compiled,
            self.inner.deps.resolver.as_ref(),
        ))
    }

    pub(crate) fn schema_body(&self, name: &str, args: &Mapping, template: bool) -> Option<Value> {
        let t = predefined::get(name)?;
        Some(if template {
            t.body().clone()
        } else {
            instantiate_template(t, args)
        })
    }
}

fn status_error(status: u16, uri: &str, body: Option<Value>) -> Error {
    let message = body
        .as_ref()
        .and_then(|b| b.get("message"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .unwrap_or_else(|| format!("GET {uri} answered {status}"));
    match status {
        403 => Error::Forbidden(message),
        404 => Error::NotFound(message),
        405 => Error::MethodNotAllowed(message),
        501 => Error::NotImplemented(message),
        500..=599 => Error::Internal(message),
        _ => Error::BadRequest {
            message,
            detail: body.and_then(|b| b.get("detail").cloned()),
        },
    }
}

/// Resolves global schema addresses: this service's schema collection
/// in-process, anything else by GET.
struct ServiceSchemaFetcher<'a> {
    svc: &'a Service,
}

impl SchemaFetcher for ServiceSchemaFetcher<'_> {
    fn fetch(&self, address: &str, params: Option<&Mapping>) -> Result<Value, SchemaError> {
        let root = self.svc.collection_uri(Collection::Schema);
        let empty = Mapping::new();
        let args = params.unwrap_or(&empty);
        if let Some(name) = address
            .strip_prefix(&root)
            .and_then(|r| r.strip_prefix('/'))
        {
            if let Some(body) = self.svc.schema_body(name, args, false) {
                return Ok(body);
            }
        }
        let uri = crate::client::with_query(address, &params_to_query(args));
        self.svc.get(&uri).map_err(|e| SchemaError::ResolutionIo {
            address: address.to_string(),
            message: e.to_string(),
        })
    }
}

fn tree_extractor(tree: &AttrTree) -> Extractor {
    match tree {
        AttrTree::Column(i) => Extractor::Column(*i),
        AttrTree::Array(items) => Extractor::Array(items.iter().map(tree_extractor).collect()),
        AttrTree::Object(fields) => Extractor::Object(
            fields
                .iter()
                .map(|(k, t)| (k.clone(), tree_extractor(t)))
                .collect(),
        ),
    }
}

fn tree_emits(tree: &AttrTree, rel: &IngestedRelation) -> Result<Value, Error> {
    Ok(match tree {
        AttrTree::Column(i) => column_emits(&rel.columns[*i]),
        AttrTree::Array(items) => compose_array(
            items
                .iter()
                .map(|t| tree_emits(t, rel))
                .collect::<Result<_, _>>()?,
        ),
        AttrTree::Object(fields) => {
            let keys: Vec<String> = fields.iter().map(|(k, _)| k.clone()).collect();
            let schemas = fields
                .iter()
                .map(|(_, t)| tree_emits(t, rel))
                .collect::<Result<_, _>>()?;
            compose_object(&keys, schemas).map_err(|e| Error::Internal(e.to_string()))?
        }
    })
}

/// Registers `tree` at `uri` and each of its nodes below it.
fn register_tree(
    out: &mut Vec<Attribute>,
    rel: &IngestedRelation,
    relation_uri: &str,
    uri: &str,
    description: Option<String>,
    tree: &AttrTree,
) -> Result<(), Error> {
    let subattributes = match tree {
        AttrTree::Column(_) => None,
        AttrTree::Array(items) => {
            let mut subs = Vec::new();
            for (i, t) in items.iter().enumerate() {
                let sub = format!("{uri}/{}", i + 1);
                register_tree(out, rel, relation_uri, &sub, None, t)?;
                subs.push(Value::String(sub));
            }
            Some(Value::Array(subs))
        }
        AttrTree::Object(fields) => {
            let mut subs = Mapping::new();
            for (k, t) in fields {
                let sub = format!("{uri}/{k}");
                register_tree(out, rel, relation_uri, &sub, None, t)?;
                subs.insert(k.clone(), Value::String(sub));
            }
            Some(Value::Object(subs))
        }
    };
    out.push(Attribute {
        uri: uri.to_string(),
        relation: relation_uri.to_string(),
        description,
        emits: tree_emits(tree, rel)?,
        extractor: tree_extractor(tree),
        subattributes,
        deletable: false,
        definition_key: None,
    });
    Ok(())
}

/// `value=<percent-encoded JSON>` for applying a transformer.
pub(crate) fn value_query(v: &Value) -> String {
    format!("value={}", percent_encode(&serialize_json(v)))
}
