//! Resource operations: representations, apply, join, create, delete,
//! task processing and predictor updates.

use std::sync::{Arc, RwLock};

use super::*;
use crate::clock::{compact_stamp, iso_minutes};
use crate::fold::{select_fold, FoldQuery};
use crate::learners::TaskInput;
use crate::schema::compat::check_compatibility;
use crate::schema::lang::is_legal_property_name;

/// Result of a create or join request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Created {
    pub uri: String,
    /// The resource already existed (join answers 302).
    pub existed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskOutcome {
    /// Trained synchronously (201).
    Created(String),
    /// Training continues in the background (202).
    Accepted(String),
}

/// Value produced by applying an attribute.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    One(Value),
    All(Vec<Value>),
}

/// Which instances an attribute request selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Index(usize),
    All,
}

pub enum PredictorView {
    Training {
        learner: Option<String>,
        started: DateTime<Utc>,
        ready_at: DateTime<Utc>,
    },
    Ready(Arc<ReadyPredictor>),
}

fn object(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn violations_detail(outcome: &ValidationOutcome) -> Value {
    Value::Array(
        outcome
            .violations
            .iter()
            .map(|v| Value::String(v.to_string()))
            .collect(),
    )
}

pub(crate) fn invalid(what: &str, outcome: &ValidationOutcome) -> Error {
    Error::with_detail(
        format!("{what}: {}", outcome.summary()),
        violations_detail(outcome),
    )
}

/// `base?query` or `base` when the query is empty.
pub(crate) fn join_query(base: &str, parts: &[String]) -> String {
    let parts: Vec<&str> = parts
        .iter()
        .map(String::as_str)
        .filter(|p| !p.is_empty())
        .collect();
    if parts.is_empty() {
        base.to_string()
    } else {
        format!("{base}?{}", parts.join("&"))
    }
}

fn fold_part(fold: Option<&FoldQuery>) -> String {
    fold.map(FoldQuery::to_query).unwrap_or_default()
}

fn chain_part(chain: &[Link]) -> String {
    if chain.is_empty() {
        String::new()
    } else {
        format!("t={}", encode_chain(chain))
    }
}

/// URI of `base` joined through `chain`.
pub(crate) fn joined_uri(base: &str, chain: &[Link]) -> String {
    join_query(base, &[chain_part(chain)])
}

fn last_segment(uri: &str) -> &str {
    let path = uri.split(['?', '#']).next().unwrap_or(uri);
    path.trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or(path)
}

/// Splits `uri` into the part before `?` and the raw query.
pub(crate) fn split_query(uri: &str) -> (&str, &str) {
    match uri.split_once('?') {
        Some((base, q)) => (base, q),
        None => (uri, ""),
    }
}

impl Service {
    // ---- discovery ------------------------------------------------------

    pub fn service_description(&self) -> Value {
        let mut m = Mapping::new();
        m.insert("psiType".into(), "service".into());
        m.insert("uri".into(), self.base_uri().into());
        for c in Collection::ALL {
            if self.is_exposed(c) {
                m.insert(c.key().into(), self.collection_uri(c).into());
            }
        }
        let related = &self.inner.settings.related_services;
        if !related.is_empty() {
            m.insert("relatedServices".into(), Value::Array(related.clone()));
        }
        Value::Object(m)
    }

    pub fn list_collection(&self, c: Collection) -> Value {
        let reg = self.read();
        let resources: Vec<Value> = match c {
            Collection::Relations => reg.relations.keys().map(|k| k.as_str().into()).collect(),
            Collection::Learners => reg.learners.keys().map(|k| k.as_str().into()).collect(),
            Collection::Predictors => reg.predictors.keys().map(|k| k.as_str().into()).collect(),
            Collection::Transformers => {
                reg.transformers.keys().map(|k| k.as_str().into()).collect()
            }
            Collection::Schema => {
                let root = self.collection_uri(Collection::Schema);
                predefined::names()
                    .map(|n| format!("{root}/{n}").into())
                    .collect()
            }
        };
        object(vec![
            ("psiType", "resource-list".into()),
            ("uri", self.collection_uri(c).into()),
            ("resources", Value::Array(resources)),
        ])
    }

    // ---- lookups --------------------------------------------------------

    pub(crate) fn relation(&self, uri: &str) -> Option<Arc<Relation>> {
        self.read().relations.get(uri).cloned()
    }

    pub(crate) fn attribute(&self, uri: &str) -> Option<Arc<Attribute>> {
        self.read().attributes.get(uri).cloned()
    }

    pub(crate) fn transformer(&self, uri: &str) -> Option<Arc<Transformer>> {
        self.read().transformers.get(uri).cloned()
    }

    pub(crate) fn learner(&self, uri: &str) -> Option<Arc<LearnerEntry>> {
        self.read().learners.get(uri).cloned()
    }

    pub(crate) fn predictor(&self, uri: &str) -> Option<Arc<Predictor>> {
        self.read().predictors.get(uri).cloned()
    }

    /// Checks that `base?t=…` was created by a join request.
    pub(crate) fn registered_join(
        &self,
        base: &str,
        chain: &[Link],
    ) -> Result<Option<String>, Error> {
        if chain.is_empty() {
            return Ok(None);
        }
        let uri = join_query(base, &[chain_part(chain)]);
        match self.read().joins.get(&uri) {
            Some(desc) => Ok(desc.clone()),
            None => Err(Error::NotFound(format!("no joined resource at {uri}"))),
        }
    }

    /// Current state, publishing a delayed predictor once its time is up.
    pub(crate) fn predictor_view(&self, p: &Predictor) -> PredictorView {
        let now = self.now();
        let mut state = p.state.write().unwrap_or_else(|e| e.into_inner());
        if let PredictorState::Training {
            ready_at, result, ..
        } = &*state
        {
            if now >= *ready_at {
                let result = result.clone();
                *state = PredictorState::Ready(result);
            }
        }
        match &*state {
            PredictorState::Ready(r) => PredictorView::Ready(r.clone()),
            PredictorState::Training {
                ready_at, started, ..
            } => PredictorView::Training {
                learner: p.learner_uri.clone(),
                started: *started,
                ready_at: *ready_at,
            },
        }
    }

    pub(crate) fn ready(&self, p: &Predictor) -> Result<Arc<ReadyPredictor>, Error> {
        match self.predictor_view(p) {
            PredictorView::Ready(r) => Ok(r),
            PredictorView::Training { .. } => Err(Error::Forbidden(format!(
                "predictor {} is still being trained",
                p.uri
            ))),
        }
    }

    // ---- transformers ---------------------------------------------------

    pub(crate) fn transformer_repr(
        &self,
        t: &Transformer,
        chain: &[Link],
        join_desc: Option<String>,
    ) -> Value {
        let mut m = Mapping::new();
        m.insert("psiType".into(), "transformer".into());
        m.insert(
            "uri".into(),
            join_query(&t.uri, &[chain_part(chain)]).into(),
        );
        let description = if chain.is_empty() {
            Some(t.description.clone())
        } else {
            join_desc
        };
        if let Some(d) = description {
            m.insert("description".into(), d.into());
        }
        m.insert("accepts".into(), t.accepts.clone());
        m.insert(
            "emits".into(),
            chain
                .last()
                .map_or_else(|| t.emits.clone(), |l| l.emits.clone()),
        );
        if chain.is_empty() {
            if let Some(p) = &t.provenance {
                m.insert("provenance".into(), p.clone());
            }
        }
        Value::Object(m)
    }

    pub(crate) fn predictor_repr(
        &self,
        p: &Predictor,
        chain: &[Link],
        join_desc: Option<String>,
    ) -> Value {
        match self.predictor_view(p) {
            PredictorView::Training {
                learner,
                started,
                ready_at,
            } => object(vec![
                ("psiType", "training-status".into()),
                ("uri", p.uri.as_str().into()),
                ("learner", learner.unwrap_or_default().into()),
                (
                    "status",
                    format!(
                        "training since {}, expected to finish by {}",
                        iso_minutes(started),
                        iso_minutes(ready_at)
                    )
                    .into(),
                ),
            ]),
            PredictorView::Ready(r) => {
                let mut m = Mapping::new();
                m.insert("psiType".into(), "transformer".into());
                m.insert(
                    "uri".into(),
                    join_query(&p.uri, &[chain_part(chain)]).into(),
                );
                let description = if chain.is_empty() {
                    Some(r.description.clone())
                } else {
                    join_desc
                };
                if let Some(d) = description {
                    m.insert("description".into(), d.into());
                }
                m.insert("accepts".into(), r.accepts.clone());
                m.insert(
                    "emits".into(),
                    chain
                        .last()
                        .map_or_else(|| r.emits.clone(), |l| l.emits.clone()),
                );
                if chain.is_empty() {
                    m.insert("provenance".into(), Value::Object(r.provenance.clone()));
                    if r.update_schema.is_some() {
                        m.insert("update".into(), format!("{}/update", p.uri).into());
                    }
                }
                Value::Object(m)
            }
        }
    }

    fn check_accepts(&self, accepts: &Value, value: &Value, uri: &str) -> Result<(), Error> {
        let outcome = self.validate(value, accepts)?;
        if outcome.is_valid() {
            Ok(())
        } else {
            Err(invalid(
                &format!("value is not accepted by {uri}"),
                &outcome,
            ))
        }
    }

    pub(crate) fn apply_local_transformer(
        &self,
        t: &Transformer,
        value: &Value,
    ) -> Result<Value, Error> {
        self.check_accepts(&t.accepts, value, &t.uri)?;
        (t.func)(value).map_err(Error::bad_request)
    }

    pub(crate) fn apply_predictor(&self, p: &Predictor, value: &Value) -> Result<Value, Error> {
        let r = self.ready(p)?;
        self.check_accepts(&r.accepts, value, &p.uri)?;
        r.model.predict(value)
    }

    /// Applies the transformer at `uri` (local or remote) to `value`.
    pub fn apply_uri(&self, uri: &str, value: &Value) -> Result<Value, Error> {
        if self.is_local(uri) {
            let (base, query) = split_query(uri);
            let chain = match query.strip_prefix("t=") {
                Some(t) => decode_chain(t)?,
                None if query.is_empty() => Vec::new(),
                None => return Err(Error::bad_request(format!("{uri} is not a transformer"))),
            };
            self.registered_join(base, &chain)?;
            let first = if let Some(t) = self.transformer(base) {
                self.apply_local_transformer(&t, value)?
            } else if let Some(p) = self.predictor(base) {
                self.apply_predictor(&p, value)?
            } else {
                return Err(Error::NotFound(format!("no transformer at {base}")));
            };
            return self.apply_chain(first, &chain);
        }
        let response = self.get(&crate::client::with_query(uri, &value_query(value)))?;
        match response.get("value") {
            Some(v) => Ok(v.clone()),
            None => Err(Error::bad_request(format!("{uri} did not return a value"))),
        }
    }

    pub(crate) fn apply_chain(&self, mut value: Value, chain: &[Link]) -> Result<Value, Error> {
        for link in chain {
            value = self.apply_uri(&link.transformer, &value)?;
        }
        Ok(value)
    }

    /// Joins the resource at `base` (currently emitting `emits` after
    /// `chain`) with the transformer at `s_uri`.
    pub(crate) fn join(
        &self,
        base: &str,
        emits: &Value,
        chain: &[Link],
        s_uri: &str,
        description: Option<String>,
    ) -> Result<Created, Error> {
        if !crate::schema::lang::has_uri_scheme(s_uri) {
            return Err(Error::bad_request(format!(
                "join target {s_uri:?} is not an absolute URI"
            )));
        }
        let repr = self.get(s_uri)?;
        if repr.get("psiType").and_then(Value::as_str) != Some("transformer") {
            return Err(Error::bad_request(format!("{s_uri} is not a transformer")));
        }
        let (Some(accepts), Some(s_emits)) = (repr.get("accepts"), repr.get("emits")) else {
            return Err(Error::bad_request(format!(
                "{s_uri} has no accepts/emits schema"
            )));
        };
        // A joined resource emits whatever the end of its chain emits.
        let emits = chain.last().map_or(emits, |l| &l.emits);
        let compiled_emits = self.compile(emits)?;
        let compiled_accepts = self.compile(accepts)?;
        check_compatibility(&compiled_emits, &compiled_accepts).map_err(|why| {
            Error::bad_request(format!(
                "{s_uri} does not accept every value emitted here: {why}"
            ))
        })?;
        let mut chain = chain.to_vec();
        chain.push(Link {
            transformer: s_uri.to_string(),
            emits: s_emits.clone(),
        });
        let uri = join_query(base, &[chain_part(&chain)]);
        let existed = {
            let mut reg = self.write();
            if reg.joins.contains_key(&uri) {
                true
            } else {
                reg.joins.insert(uri.clone(), description.clone());
                false
            }
        };
        if !existed {
            self.record(Event::JoinCreated {
                uri: uri.clone(),
                description,
            });
        }
        Ok(Created { uri, existed })
    }

    pub(crate) fn delete_join(&self, uri: &str) -> Result<(), Error> {
        if self.write().joins.shift_remove(uri).is_none() {
            return Err(Error::NotFound(format!("no joined resource at {uri}")));
        }
        self.record(Event::JoinDeleted {
            uri: uri.to_string(),
        });
        Ok(())
    }

    // ---- relations ------------------------------------------------------

    pub(crate) fn relation_attributes(&self, rel: &Relation) -> Vec<String> {
        let reg = self.read();
        let mut out = rel.top_attributes.clone();
        out.extend(
            reg.attributes
                .values()
                .filter(|a| a.relation == rel.uri && a.definition_key.is_some())
                .map(|a| a.uri.clone()),
        );
        out
    }

    pub(crate) fn selected_rows(
        &self,
        rel: &Relation,
        fold: Option<&FoldQuery>,
    ) -> Result<Vec<usize>, Error> {
        let n = rel.rows.len();
        match fold {
            None => Ok((1..=n).collect()),
            Some(q) => select_fold(n, q),
        }
    }

    pub(crate) fn relation_repr(
        &self,
        rel: &Relation,
        fold: Option<&FoldQuery>,
    ) -> Result<Value, Error> {
        if fold.is_some() && rel.query_schema.is_none() {
            return Err(Error::bad_request(format!(
                "{} does not support queries",
                rel.uri
            )));
        }
        let size = self.selected_rows(rel, fold)?.len();
        let q = fold_part(fold);
        let mut m = Mapping::new();
        m.insert("psiType".into(), "relation".into());
        m.insert(
            "uri".into(),
            join_query(&rel.uri, std::slice::from_ref(&q)).into(),
        );
        if let Some(d) = &rel.description {
            let d = match fold {
                Some(f) => format!("{d} ({})", f.describe()),
                None => d.clone(),
            };
            m.insert("description".into(), d.into());
        }
        m.insert("size".into(), Value::Integer(size as i64));
        m.insert(
            "defaultAttribute".into(),
            join_query(&rel.default_attribute, std::slice::from_ref(&q)).into(),
        );
        let attributes = self
            .relation_attributes(rel)
            .into_iter()
            .map(|a| Value::String(join_query(&a, std::slice::from_ref(&q))))
            .collect();
        m.insert("attributes".into(), Value::Array(attributes));
        if let Some(qs) = &rel.query_schema {
            m.insert("querySchema".into(), qs.clone());
        }
        Ok(Value::Object(m))
    }

    // ---- attributes -----------------------------------------------------

    pub(crate) fn attribute_repr(
        &self,
        a: &Attribute,
        fold: Option<&FoldQuery>,
        chain: &[Link],
        join_desc: Option<String>,
    ) -> Result<Value, Error> {
        let rel = self
            .relation(&a.relation)
            .ok_or_else(|| Error::Internal(format!("relation of {} is missing", a.uri)))?;
        if fold.is_some() {
            // Rejects out-of-range folds the same way the relation does.
            self.relation_repr(&rel, fold)?;
        }
        let q = fold_part(fold);
        let mut m = Mapping::new();
        m.insert("psiType".into(), "attribute".into());
        m.insert(
            "uri".into(),
            join_query(&a.uri, &[q.clone(), chain_part(chain)]).into(),
        );
        let description = if chain.is_empty() {
            a.description.clone()
        } else {
            join_desc
        };
        if let Some(d) = description {
            m.insert("description".into(), d.into());
        }
        m.insert(
            "relation".into(),
            join_query(&rel.uri, std::slice::from_ref(&q)).into(),
        );
        m.insert(
            "emits".into(),
            chain
                .last()
                .map_or_else(|| a.emits.clone(), |l| l.emits.clone()),
        );
        if chain.is_empty() {
            let suffix = |u: &Value| match u {
                Value::String(s) => Value::String(join_query(s, std::slice::from_ref(&q))),
                other => other.clone(),
            };
            match &a.subattributes {
                Some(Value::Array(items)) => {
                    m.insert(
                        "subattributes".into(),
                        Value::Array(items.iter().map(suffix).collect()),
                    );
                }
                Some(Value::Object(fields)) => {
                    m.insert(
                        "subattributes".into(),
                        Value::Object(fields.iter().map(|(k, v)| (k.clone(), suffix(v))).collect()),
                    );
                }
                _ => {}
            }
        }
        if let Some(qs) = &rel.query_schema {
            m.insert("querySchema".into(), qs.clone());
        }
        Ok(Value::Object(m))
    }

    fn extract(&self, ex: &Extractor, row: &[Value]) -> Result<Value, Error> {
        Ok(match ex {
            Extractor::Column(i) => row
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::Internal(format!("row has no column {i}")))?,
            Extractor::Array(items) => Value::Array(
                items
                    .iter()
                    .map(|e| self.extract(e, row))
                    .collect::<Result<_, _>>()?,
            ),
            Extractor::Object(fields) => Value::Object(
                fields
                    .iter()
                    .map(|(k, e)| Ok((k.clone(), self.extract(e, row)?)))
                    .collect::<Result<_, Error>>()?,
            ),
            Extractor::Joined { inner, chain } => {
                let mut v = self.extract(inner, row)?;
                for t in chain {
                    v = self.apply_uri(t, &v)?;
                }
                v
            }
        })
    }

    pub(crate) fn apply_attribute(
        &self,
        a: &Attribute,
        selector: Selector,
        fold: Option<&FoldQuery>,
        chain: &[Link],
    ) -> Result<Applied, Error> {
        let rel = self
            .relation(&a.relation)
            .ok_or_else(|| Error::Internal(format!("relation of {} is missing", a.uri)))?;
        if fold.is_some() && rel.query_schema.is_none() {
            return Err(Error::bad_request(format!(
                "{} does not support queries",
                rel.uri
            )));
        }
        let rows = self.selected_rows(&rel, fold)?;
        let one = |index: usize| -> Result<Value, Error> {
            let v = self.extract(&a.extractor, &rel.rows[index - 1])?;
            self.apply_chain(v, chain)
        };
        match selector {
            Selector::Index(i) => {
                if i == 0 || i > rows.len() {
                    return Err(Error::bad_request(format!(
                        "instance {i} is outside 1..={}",
                        rows.len()
                    )));
                }
                Ok(Applied::One(one(rows[i - 1])?))
            }
            Selector::All => Ok(Applied::All(
                rows.into_iter().map(one).collect::<Result<_, _>>()?,
            )),
        }
    }

    /// Parses an attribute URI used in a definition, which may carry a join
    /// chain but no other query.
    fn definition_leaf(&self, rel: &Relation, uri: &str) -> Result<(Extractor, Value), Error> {
        let (base, query) = split_query(uri);
        let chain = match query.strip_prefix("t=") {
            Some(t) => decode_chain(t)?,
            None if query.is_empty() => Vec::new(),
            None => {
                return Err(Error::bad_request(format!(
                    "attribute {uri} in a definition may only carry a join query"
                )))
            }
        };
        let a = self.attribute(base).ok_or_else(|| {
            Error::bad_request(format!("{uri} is not an attribute of {}", rel.uri))
        })?;
        if a.relation != rel.uri {
            return Err(Error::bad_request(format!(
                "{uri} belongs to {}, not {}",
                a.relation, rel.uri
            )));
        }
        if chain.is_empty() {
            return Ok((a.extractor.clone(), a.emits.clone()));
        }
        self.registered_join(base, &chain).map_err(|_| {
            Error::bad_request(format!("{uri} is not a joined attribute of this service"))
        })?;
        let emits = chain.last().map(|l| l.emits.clone()).expect("non-empty");
        Ok((
            Extractor::Joined {
                inner: Box::new(a.extractor.clone()),
                chain: chain.into_iter().map(|l| l.transformer).collect(),
            },
            emits,
        ))
    }

    /// Builds the attribute (and nested nodes) for a definition at `uri`.
    fn build_definition(
        &self,
        rel: &Relation,
        uri: &str,
        def: &Value,
        nodes: &mut Vec<Attribute>,
    ) -> Result<(Extractor, Value, Value), Error> {
        match def {
            Value::String(leaf) => {
                let (ex, emits) = self.definition_leaf(rel, leaf)?;
                Ok((ex, emits, Value::String(leaf.clone())))
            }
            Value::Array(items) => {
                let mut extractors = Vec::new();
                let mut schemas = Vec::new();
                let mut subs = Vec::new();
                for (i, item) in items.iter().enumerate() {
                    let (ex, emits, sub) =
                        self.build_nested(rel, &format!("{uri}/{}", i + 1), item, nodes)?;
                    extractors.push(ex);
                    schemas.push(emits);
                    subs.push(sub);
                }
                Ok((
                    Extractor::Array(extractors),
                    compose_array(schemas),
                    Value::Array(subs),
                ))
            }
            Value::Object(fields) => {
                let mut extractors = Vec::new();
                let mut keys = Vec::new();
                let mut schemas = Vec::new();
                let mut subs = Mapping::new();
                for (k, item) in fields {
                    if !is_legal_property_name(k) {
                        return Err(Error::bad_request(format!(
                            "{k:?} cannot be used as a property name"
                        )));
                    }
                    let (ex, emits, sub) =
                        self.build_nested(rel, &format!("{uri}/{k}"), item, nodes)?;
                    extractors.push((k.clone(), ex));
                    keys.push(k.clone());
                    schemas.push(emits);
                    subs.insert(k.clone(), sub);
                }
                let emits = compose_object(&keys, schemas)?;
                Ok((Extractor::Object(extractors), emits, Value::Object(subs)))
            }
            other => Err(Error::bad_request(format!(
                "attribute definitions are arrays, objects and attribute URIs, not {}",
                other.type_name()
            ))),
        }
    }

    /// A nested array/object in a definition becomes its own attribute so
    /// that subattributes are always URIs.
    fn build_nested(
        &self,
        rel: &Relation,
        uri: &str,
        def: &Value,
        nodes: &mut Vec<Attribute>,
    ) -> Result<(Extractor, Value, Value), Error> {
        let (ex, emits, subs) = self.build_definition(rel, uri, def, nodes)?;
        if matches!(def, Value::String(_)) {
            return Ok((ex, emits, subs));
        }
        nodes.push(Attribute {
            uri: uri.to_string(),
            relation: rel.uri.clone(),
            description: None,
            emits: emits.clone(),
            extractor: ex.clone(),
            subattributes: Some(subs),
            deletable: true,
            definition_key: None,
        });
        Ok((ex, emits, Value::String(uri.to_string())))
    }

    /// Creates an attribute of `relation_uri`; `forced` pins the URI when
    /// replaying the journal.
    pub(crate) fn create_attribute(
        &self,
        relation_uri: &str,
        definition: &Value,
        description: Option<String>,
        forced: Option<&str>,
    ) -> Result<Created, Error> {
        let rel = self
            .relation(relation_uri)
            .ok_or_else(|| Error::NotFound(format!("no relation at {relation_uri}")))?;
        if !matches!(definition, Value::Array(_) | Value::Object(_)) {
            return Err(Error::bad_request(
                "an attribute definition must be an array or an object",
            ));
        }
        let key = format!("{relation_uri} {}", serialize_json(definition));
        if let Some(uri) = self.read().definitions.get(&key) {
            return Ok(Created {
                uri: uri.clone(),
                existed: true,
            });
        }
        let uri = match forced {
            Some(u) => u.to_string(),
            None => {
                let reg = self.read();
                let mut n = reg.next_derived + 1;
                loop {
                    let candidate = format!("{relation_uri}/derived/{n}");
                    if !reg.attributes.contains_key(&candidate) {
                        break candidate;
                    }
                    n += 1;
                }
            }
        };
        let mut nodes = Vec::new();
        let (extractor, emits, subs) = self.build_definition(&rel, &uri, definition, &mut nodes)?;
        let attribute = Attribute {
            uri: uri.clone(),
            relation: relation_uri.to_string(),
            description: description.clone(),
            emits,
            extractor,
            subattributes: Some(subs),
            deletable: true,
            definition_key: Some(key.clone()),
        };
        {
            let mut reg = self.write();
            if let Some(existing) = reg.definitions.get(&key) {
                return Ok(Created {
                    uri: existing.clone(),
                    existed: true,
                });
            }
            if reg.attributes.contains_key(&uri) {
                return Err(Error::Internal(format!("{uri} is already in use")));
            }
            if let Some(n) = uri
                .strip_prefix(&format!("{relation_uri}/derived/"))
                .and_then(|n| n.parse::<u64>().ok())
            {
                reg.next_derived = reg.next_derived.max(n);
            }
            reg.definitions.insert(key, uri.clone());
            for node in nodes {
                reg.attributes.insert(node.uri.clone(), Arc::new(node));
            }
            reg.attributes.insert(uri.clone(), Arc::new(attribute));
        }
        self.record(Event::AttributeCreated {
            uri: uri.clone(),
            relation: relation_uri.to_string(),
            definition: definition.clone(),
            description,
        });
        Ok(Created {
            uri,
            existed: false,
        })
    }

    pub(crate) fn delete_attribute(&self, uri: &str) -> Result<(), Error> {
        {
            let mut reg = self.write();
            let a = reg
                .attributes
                .get(uri)
                .cloned()
                .ok_or_else(|| Error::NotFound(format!("no attribute at {uri}")))?;
            if !a.deletable {
                return Err(Error::Forbidden(format!(
                    "{uri} is defined by the service and cannot be deleted"
                )));
            }
            if a.definition_key.is_none() {
                return Err(Error::Forbidden(format!(
                    "{uri} is part of another attribute; delete that attribute instead"
                )));
            }
            let nested = format!("{uri}/");
            reg.attributes
                .retain(|k, _| k != uri && !k.starts_with(&nested));
            let joined = format!("{uri}?");
            reg.joins.retain(|k, _| !k.starts_with(&joined));
            if let Some(key) = &a.definition_key {
                reg.definitions.remove(key);
            }
        }
        self.record(Event::AttributeDeleted {
            uri: uri.to_string(),
        });
        Ok(())
    }

    // ---- learners -------------------------------------------------------

    pub(crate) fn learner_repr(&self, l: &LearnerEntry) -> Value {
        object(vec![
            ("psiType", "learner".into()),
            ("uri", l.uri.as_str().into()),
            ("description", l.learner.description().into()),
            ("taskSchema", l.learner.task_schema()),
        ])
    }

    /// Compiles the `emits`/`accepts` schema of a dereferenced resource so
    /// resource schema can constrain their structure.
    fn compile_representation(&self, repr: &Value) -> Result<Value, Error> {
        let mut repr = repr.clone();
        if let Some(m) = repr.as_object_mut() {
            for key in ["emits", "accepts"] {
                if let Some(s) = m.get(key).cloned() {
                    m.insert(key.into(), self.compile(&s)?);
                }
            }
        }
        Ok(repr)
    }

    fn fresh_predictor_uri(&self, stem: &str) -> String {
        let root = self.collection_uri(Collection::Predictors);
        let reg = self.read();
        let first = format!("{root}/{stem}");
        if !reg.predictors.contains_key(&first) {
            return first;
        }
        (2..)
            .map(|n| format!("{first}_{n}"))
            .find(|u| !reg.predictors.contains_key(u))
            .expect("unbounded")
    }

    pub(crate) fn process_task(
        &self,
        l: &LearnerEntry,
        body: &Value,
    ) -> Result<TaskOutcome, Error> {
        if body.get("psiType").and_then(Value::as_str) != Some("task") {
            return Err(Error::bad_request("a process request has psiType \"task\""));
        }
        let Some(Value::Object(task)) = body.get("task") else {
            return Err(Error::bad_request(
                "a process request carries a task object",
            ));
        };

        // Dereference resources.
        let mut resources = Mapping::new();
        let mut compiled_resources = Mapping::new();
        if let Some(given) = task.get("resources") {
            let Value::Object(given) = given else {
                return Err(Error::bad_request("task resources must be an object"));
            };
            for (name, r) in given {
                let repr = match r {
                    Value::String(s) if s.starts_with('$') => {
                        let uri = &s[1..];
                        self.get(uri).map_err(|e| {
                            Error::with_detail(
                                format!("resource {name} ({uri}) could not be dereferenced: {e}"),
                                object(vec![
                                    ("resource", name.as_str().into()),
                                    ("uri", uri.into()),
                                    ("status", Value::Integer(e.status() as i64)),
                                ]),
                            )
                        })?
                    }
                    other => other.clone(),
                };
                compiled_resources.insert(name.clone(), self.compile_representation(&repr)?);
                resources.insert(name.clone(), repr);
            }
        }
        let mut assembled = task.clone();
        if task.contains_key("resources") {
            assembled.insert("resources".into(), Value::Object(compiled_resources));
        }
        let assembled = Value::Object(assembled);

        let schema = self.compile(&l.learner.task_schema())?;
        let outcome =
            validate_with_resolver(&assembled, &schema, self.inner.deps.resolver.as_ref());
        if !outcome.is_valid() {
            return Err(invalid(
                &format!("task is not valid for {}", l.uri),
                &outcome,
            ));
        }

        let mut with_defaults = task.clone();
        apply_defaults(&mut with_defaults, &schema);
        let fetch = |uri: &str| self.get(uri);
        let trained = l.learner.train(&TaskInput {
            task: &with_defaults,
            resources: &resources,
            fetch: &fetch,
        })?;

        let now = self.now();
        let learner_name = last_segment(&l.uri).to_string();
        let uri = self.fresh_predictor_uri(&format!(
            "{learner_name}_{}_{}",
            trained.tag,
            compact_stamp(now)
        ));
        let mut provenance = Mapping::new();
        provenance.insert("learner".into(), l.uri.as_str().into());
        provenance.insert("task".into(), Value::Object(task.clone()));
        provenance.insert("created".into(), iso_minutes(now).into());
        let ready = Arc::new(ReadyPredictor {
            description: trained.description,
            accepts: trained.accepts,
            emits: trained.emits,
            provenance,
            model: trained.model,
            update_schema: trained.update_schema,
        });
        let (state, outcome) = match l.learner.training_delay() {
            None => (
                PredictorState::Ready(ready.clone()),
                TaskOutcome::Created(uri.clone()),
            ),
            Some(delay) => {
                let delay = chrono::Duration::from_std(delay).unwrap_or(chrono::Duration::MAX);
                (
                    PredictorState::Training {
                        ready_at: now + delay,
                        started: now,
                        result: ready.clone(),
                    },
                    TaskOutcome::Accepted(uri.clone()),
                )
            }
        };
        let predictor = Predictor {
            uri: uri.clone(),
            learner_uri: Some(l.uri.clone()),
            learner_kind: l.kind.clone(),
            tag: trained.tag,
            state: RwLock::new(state),
        };
        self.write()
            .predictors
            .insert(uri.clone(), Arc::new(predictor));
        self.record(created_event(&uri, &l.kind, &ready));
        Ok(outcome)
    }

    /// Installs an already trained predictor at `uri`.
    pub(crate) fn install_predictor(
        &self,
        uri: &str,
        learner_uri: Option<String>,
        kind: &str,
        ready: ReadyPredictor,
    ) {
        let predictor = Predictor {
            uri: uri.to_string(),
            learner_uri,
            learner_kind: kind.to_string(),
            tag: last_segment(uri).to_string(),
            state: RwLock::new(PredictorState::Ready(Arc::new(ready))),
        };
        self.write()
            .predictors
            .insert(uri.to_string(), Arc::new(predictor));
    }

    // ---- predictors -----------------------------------------------------

    pub(crate) fn update_schema(&self, p: &Predictor) -> Result<Value, Error> {
        let r = self.ready(p)?;
        r.update_schema
            .clone()
            .ok_or_else(|| Error::NotFound(format!("{} is not updatable", p.uri)))
    }

    /// Returns the URI of the updated predictor and whether it is new.
    pub(crate) fn update_predictor(&self, p: &Predictor, body: &Value) -> Result<Created, Error> {
        let r = self.ready(p)?;
        let schema = r
            .update_schema
            .clone()
            .ok_or_else(|| Error::NotFound(format!("{} is not updatable", p.uri)))?;
        if body.get("psiType").and_then(Value::as_str) != Some("value") {
            return Err(Error::bad_request(
                "an update request has psiType \"value\"",
            ));
        }
        let values = match (body.get("value"), body.get("valueList")) {
            (Some(v), None) => vec![v.clone()],
            (None, Some(Value::Array(vs))) => vs.clone(),
            (None, Some(_)) => return Err(Error::bad_request("valueList must be an array")),
            _ => {
                return Err(Error::bad_request(
                    "exactly one of value and valueList must be given",
                ))
            }
        };
        let compiled = self.compile(&schema)?;
        for (i, v) in values.iter().enumerate() {
            let outcome = validate_with_resolver(v, &compiled, self.inner.deps.resolver.as_ref());
            if !outcome.is_valid() {
                return Err(invalid(
                    &format!("update value {} is not valid", i + 1),
                    &outcome,
                ));
            }
        }
        let model = r.model.update(&values)?;
        let mut provenance = r.provenance.clone();
        provenance.insert("updated".into(), iso_minutes(self.now()).into());
        let updated = ReadyPredictor {
            description: r.description.clone(),
            accepts: r.accepts.clone(),
            emits: r.emits.clone(),
            provenance,
            model,
            update_schema: r.update_schema.clone(),
        };
        if self.inner.settings.immutable_predictors {
            let stem = format!("{}_{}", last_segment(&p.uri), compact_stamp(self.now()));
            let uri = self.fresh_predictor_uri(&stem);
            let ready = Arc::new(updated);
            let predictor = Predictor {
                uri: uri.clone(),
                learner_uri: p.learner_uri.clone(),
                learner_kind: p.learner_kind.clone(),
                tag: p.tag.clone(),
                state: RwLock::new(PredictorState::Ready(ready.clone())),
            };
            self.write()
                .predictors
                .insert(uri.clone(), Arc::new(predictor));
            self.record(created_event(&uri, &p.learner_kind, &ready));
            return Ok(Created {
                uri,
                existed: false,
            });
        }
        let event = Event::PredictorUpdated {
            uri: p.uri.clone(),
            provenance: Value::Object(updated.provenance.clone()),
            model: updated.model.snapshot(),
        };
        *p.state.write().unwrap_or_else(|e| e.into_inner()) =
            PredictorState::Ready(Arc::new(updated));
        self.record(event);
        Ok(Created {
            uri: p.uri.clone(),
            existed: true,
        })
    }

    pub(crate) fn delete_predictor(&self, p: &Predictor) -> Result<(), Error> {
        self.ready(p)?;
        {
            let mut reg = self.write();
            if reg.predictors.shift_remove(&p.uri).is_none() {
                return Err(Error::NotFound(format!("no predictor at {}", p.uri)));
            }
            let joined = format!("{}?", p.uri);
            reg.joins.retain(|k, _| !k.starts_with(&joined));
        }
        self.record(Event::PredictorDeleted { uri: p.uri.clone() });
        Ok(())
    }

    // ---- journal replay -------------------------------------------------

    pub(crate) fn replay(&self, event: Event) -> Result<(), Error> {
        match event {
            Event::AttributeCreated {
                uri,
                relation,
                definition,
                description,
            } => {
                let created =
                    self.create_attribute(&relation, &definition, description, Some(&uri))?;
                if created.uri != uri {
                    return Err(Error::Internal(format!(
                        "{uri} replayed as {}",
                        created.uri
                    )));
                }
            }
            Event::AttributeDeleted { uri } => self.delete_attribute(&uri)?,
            Event::JoinCreated { uri, description } => {
                self.write().joins.insert(uri, description);
            }
            Event::JoinDeleted { uri } => self.delete_join(&uri)?,
            Event::PredictorCreated {
                uri,
                learner_kind,
                description,
                accepts,
                emits,
                update_schema,
                provenance,
                model,
            } => {
                let model = self.restore_model(&learner_kind, &model)?;
                let provenance = match provenance {
                    Value::Object(m) => m,
                    _ => Mapping::new(),
                };
                let learner_uri = provenance
                    .get("learner")
                    .and_then(Value::as_str)
                    .map(str::to_string);
                self.install_predictor(
                    &uri,
                    learner_uri,
                    &learner_kind,
                    ReadyPredictor {
                        description,
                        accepts,
                        emits,
                        provenance,
                        model,
                        update_schema,
                    },
                );
            }
            Event::PredictorUpdated {
                uri,
                provenance,
                model,
            } => {
                let p = self
                    .predictor(&uri)
                    .ok_or_else(|| Error::NotFound(format!("no predictor at {uri}")))?;
                let r = self.ready(&p)?;
                let model = self.restore_model(&p.learner_kind, &model)?;
                let provenance = match provenance {
                    Value::Object(m) => m,
                    _ => r.provenance.clone(),
                };
                let updated = ReadyPredictor {
                    description: r.description.clone(),
                    accepts: r.accepts.clone(),
                    emits: r.emits.clone(),
                    provenance,
                    model,
                    update_schema: r.update_schema.clone(),
                };
                *p.state.write().unwrap_or_else(|e| e.into_inner()) =
                    PredictorState::Ready(Arc::new(updated));
            }
            Event::PredictorDeleted { uri } => {
                self.write().predictors.shift_remove(&uri);
            }
        }
        Ok(())
    }

    fn restore_model(&self, kind: &str, snapshot: &Value) -> Result<Arc<dyn Model>, Error> {
        let from_registry = self
            .read()
            .learners
            .values()
            .find(|l| l.kind == kind)
            .map(|l| l.learner.clone());
        let learner = match from_registry {
            Some(l) => l,
            None => crate::learners::builtin_learner(kind, None)
                .ok_or_else(|| Error::Internal(format!("unknown learner kind {kind}")))?,
        };
        learner.restore(snapshot)
    }
}

fn created_event(uri: &str, kind: &str, r: &ReadyPredictor) -> Event {
    Event::PredictorCreated {
        uri: uri.to_string(),
        learner_kind: kind.to_string(),
        description: r.description.clone(),
        accepts: r.accepts.clone(),
        emits: r.emits.clone(),
        update_schema: r.update_schema.clone(),
        provenance: Value::Object(r.provenance.clone()),
        model: r.model.snapshot(),
    }
}

/// Fills absent properties that carry a `default` in the compiled schema.
pub(crate) fn apply_defaults(value: &mut Mapping, schema: &Value) {
    let Some(props) = schema.get("properties").and_then(Value::as_object) else {
        return;
    };
    for (name, sub) in props {
        match value.get_mut(name) {
            None => {
                if let Some(d) = sub.get("default") {
                    value.insert(name.clone(), d.clone());
                }
            }
            Some(Value::Object(inner)) if name != "resources" => apply_defaults(inner, sub),
            Some(_) => {}
        }
    }
}
