//! Fold partition and attribute-composition properties.

use std::collections::BTreeSet;

use proptest::prelude::*;
use psi_core::fold::{select_fold, FoldQuery};
use psi_core::http::Request;
use psi_core::{Mapping, Service, Value};

use super::{get, world, LEAVES, SPECIES};

// ---- folds ---------------------------------------------------------------

pub fn folds_partition_the_instances() {
    for n in [1usize, 10, 150] {
        for k in [1usize, 2, 5] {
            let mut seen = Vec::new();
            let mut sizes = Vec::new();
            for i in 1..=k {
                let q = FoldQuery::new(i, k);
                let fold = select_fold(n, &q).unwrap();
                let rest = select_fold(n, &q.inverted()).unwrap();
                let mut union: Vec<usize> = fold.iter().chain(&rest).copied().collect();
                union.sort();
                assert_eq!(
                    union,
                    (1..=n).collect::<Vec<_>>(),
                    "n={n} k={k} fold {i} ∪ inverse"
                );
                assert!(
                    fold.iter().all(|x| !rest.contains(x)),
                    "n={n} k={k} fold {i} ∩ inverse"
                );
                sizes.push(fold.len());
                seen.extend(fold);
            }
            seen.sort();
            assert_eq!(
                seen,
                (1..=n).collect::<Vec<_>>(),
                "n={n} k={k} folds cover once"
            );
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1, "n={n} k={k} sizes {sizes:?}");
        }
    }
    let fold = select_fold(150, &FoldQuery::new(2, 5)).unwrap();
    assert_eq!(fold.len(), 30);
    assert_eq!(fold[0], 2);
}

// ---- attribute composition -----------------------------------------------

#[derive(Debug, Clone)]
pub enum Def {
    Leaf(usize),
    Array(Vec<Def>),
    Object(Vec<(String, Def)>),
}

fn all_leaves() -> Vec<&'static str> {
    let mut v = LEAVES.to_vec();
    v.push(SPECIES);
    v
}

pub fn def_strategy() -> impl Strategy<Value = Def> {
    let leaf = (0usize..5).prop_map(Def::Leaf);
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(Def::Array),
            prop::collection::btree_map("[a-e]", inner, 1..4)
                .prop_map(|m| Def::Object(m.into_iter().collect())),
        ]
    })
}

fn definition(d: &Def) -> Value {
    match d {
        Def::Leaf(i) => Value::from(all_leaves()[*i]),
        Def::Array(items) => Value::Array(items.iter().map(definition).collect()),
        Def::Object(fields) => Value::Object(
            fields
                .iter()
                .map(|(k, v)| (k.clone(), definition(v)))
                .collect(),
        ),
    }
}

/// Compiled schema of the composition, assembled from each leaf's compiled
/// schema by the array/object rules.
fn composed_schema(svc: &Service, d: &Def) -> Value {
    match d {
        Def::Leaf(i) => {
            let repr = get(svc, all_leaves()[*i]);
            svc.compile(repr.get("emits").unwrap()).unwrap()
        }
        Def::Array(items) => {
            let mut m = Mapping::new();
            m.insert("type".into(), "array".into());
            m.insert(
                "items".into(),
                Value::Array(items.iter().map(|x| composed_schema(svc, x)).collect()),
            );
            Value::Object(m)
        }
        Def::Object(fields) => {
            let mut props = Mapping::new();
            for (k, v) in fields {
                props.insert(k.clone(), composed_schema(svc, v));
            }
            let mut m = Mapping::new();
            m.insert("properties".into(), Value::Object(props));
            m.insert(
                "required".into(),
                Value::Array(
                    fields
                        .iter()
                        .map(|(k, _)| Value::from(k.as_str()))
                        .collect(),
                ),
            );
            m.insert("type".into(), "object".into());
            Value::Object(m)
        }
    }
}

fn composed_value(svc: &Service, d: &Def, instance: usize) -> Value {
    match d {
        Def::Leaf(i) => get(svc, &format!("{}?instance={instance}", all_leaves()[*i]))
            .get("value")
            .unwrap()
            .clone(),
        Def::Array(items) => Value::Array(
            items
                .iter()
                .map(|x| composed_value(svc, x, instance))
                .collect(),
        ),
        Def::Object(fields) => Value::Object(
            fields
                .iter()
                .map(|(k, v)| (k.clone(), composed_value(svc, v, instance)))
                .collect(),
        ),
    }
}

/// Subattributes mirror the definition: same length or keys, leaves point
/// at the defining attribute, nested parts are attributes of the same shape.
fn check_shape(svc: &Service, uri: &str, d: &Def) {
    let repr = get(svc, uri);
    let subs = repr.get("subattributes");
    match d {
        Def::Leaf(_) => {}
        Def::Array(items) => {
            let subs = subs.and_then(Value::as_array).expect("array subattributes");
            assert_eq!(subs.len(), items.len());
            for (s, item) in subs.iter().zip(items) {
                check_part(svc, s.as_str().unwrap(), item);
            }
        }
        Def::Object(fields) => {
            let subs = subs
                .and_then(Value::as_object)
                .expect("object subattributes");
            let keys: BTreeSet<&String> = subs.keys().collect();
            assert_eq!(keys, fields.iter().map(|(k, _)| k).collect());
            for (k, item) in fields {
                check_part(svc, subs.get(k).unwrap().as_str().unwrap(), item);
            }
        }
    }
}

fn check_part(svc: &Service, uri: &str, d: &Def) {
    match d {
        Def::Leaf(i) => assert_eq!(uri, all_leaves()[*i]),
        _ => check_shape(svc, uri, d),
    }
}

/// Creates the composition `d` and checks its compiled emits, its value at
/// `instance`, and the shape of its subattributes.
pub fn composition_commutes(d: &Def, instance: usize) -> Result<(), TestCaseError> {
    let w = world();
    let mut body = Mapping::new();
    body.insert("psiType".into(), "attribute-definition".into());
    body.insert("attribute".into(), definition(d));
    let r = w.svc.handle(&Request::post(
        "http://example.org/data/iris",
        &Value::Object(body),
    ));
    prop_assert_eq!(r.status, 201, "{:?}", r.body);
    let uri = r.location.unwrap();

    let repr = get(&w.svc, &uri);
    let compiled = w.svc.compile(repr.get("emits").unwrap()).unwrap();
    prop_assert_eq!(compiled, composed_schema(&w.svc, d));

    let v = get(&w.svc, &format!("{uri}?instance={instance}"));
    prop_assert_eq!(
        v.get("value").unwrap(),
        &composed_value(&w.svc, d, instance)
    );

    check_shape(&w.svc, &uri, d);
    Ok(())
}

/// Compositions only; a bare leaf is not a definition worth creating.
pub fn composition_strategy() -> impl Strategy<Value = (Def, usize)> {
    (
        def_strategy().prop_filter("compositions only", |d| !matches!(d, Def::Leaf(_))),
        1usize..=150,
    )
}
