//! Conformance profiles and restart persistence.

use std::sync::Arc;

use psi_core::clock::ManualClock;
use psi_core::federation::Federation;
use psi_core::http::Request;
use psi_core::{Service, Value};

use super::{boot, config, get, post};

const KEYS: [&str; 5] = [
    "relations",
    "schema",
    "learners",
    "predictors",
    "transformers",
];

fn boot_one(file: &str, base: &str) -> Service {
    let clock = Arc::new(ManualClock::walkthrough());
    boot(
        &config(file, base),
        &Arc::new(Federation::offline()),
        &clock,
    )
}

/// Every advertised collection lists only resources that answer GET, and
/// every collection not advertised is absent. Returns the advertised keys.
fn check_entry(svc: &Service, base: &str) -> Vec<&'static str> {
    let entry = get(svc, base);
    let mut present = Vec::new();
    for key in KEYS {
        match entry.get(key) {
            Some(uri) => {
                present.push(key);
                let list = get(svc, uri.as_str().unwrap());
                for r in list.get("resources").unwrap().as_array().unwrap() {
                    get(svc, r.as_str().unwrap());
                }
            }
            None => {
                let default_path = match key {
                    "relations" => "data",
                    "learners" => "learn",
                    "predictors" => "infer",
                    "transformers" => "transform",
                    _ => "schema",
                };
                let r = svc.handle(&Request::get(&format!("{base}/{default_path}")));
                assert_eq!(
                    r.status, 404,
                    "{key} is not advertised but {base}/{default_path} answers"
                );
            }
        }
    }
    present
}

pub fn full_profile_offers_everything() {
    let svc = boot_one("psi.json", "http://example.org");
    assert_eq!(check_entry(&svc, "http://example.org"), KEYS.to_vec());
}

pub fn predictor_only_profile() {
    let svc = boot_one("predictor-only.json", "http://models.example.org");
    assert_eq!(
        check_entry(&svc, "http://models.example.org"),
        vec!["predictors"]
    );

    let list = get(&svc, "http://models.example.org/infer");
    let predictors = list.get("resources").unwrap().as_array().unwrap();
    assert_eq!(predictors.len(), 1);
    let p = predictors[0].as_str().unwrap();
    let repr = get(&svc, p);
    assert_eq!(repr.get("psiType"), Some(&Value::from("transformer")));
    assert!(repr.get("provenance").unwrap().get("learner").is_none());
    let guess = get(&svc, &format!("{p}?value=%5B6.1%2C2.1%2C4.1%2C1.7%5D"));
    assert_eq!(guess.get("value"), Some(&Value::from("versicolor")));

    // Nothing about the training data is reachable.
    for hidden in [
        "data/iris",
        "data/iris/flower",
        "learn/knn",
        "transform/square",
    ] {
        let r = svc.handle(&Request::get(&format!(
            "http://models.example.org/{hidden}"
        )));
        assert_eq!(r.status, 404, "{hidden}");
    }
}

pub fn data_only_profile() {
    let svc = boot_one("flowers.json", "http://flowers.com");
    assert_eq!(
        check_entry(&svc, "http://flowers.com"),
        vec!["relations", "schema"]
    );
    let rel = get(&svc, "http://flowers.com/data/irises");
    for a in rel.get("attributes").unwrap().as_array().unwrap() {
        let a = a.as_str().unwrap();
        get(&svc, a);
        get(&svc, &format!("{a}?instance=all"));
    }
    get(&svc, "http://flowers.com/schema/number?template=true");
    for hidden in ["learn/knn", "transform/square", "infer"] {
        let r = svc.handle(&Request::get(&format!("http://flowers.com/{hidden}")));
        assert_eq!(r.status, 404, "{hidden}");
    }
}

pub fn journal_replays_client_changes() {
    let dir = tempfile::tempdir().unwrap();
    let journal = dir.path().join("journal.jsonl");
    let boot_persistent = || {
        let clock = Arc::new(ManualClock::walkthrough());
        let mut cfg = config("psi.json", "http://example.org");
        cfg.persistence = Some(journal.clone());
        boot(&cfg, &Arc::new(Federation::offline()), &clock)
    };

    let (attr, gone, joined, predictor, answer) = {
        let svc = boot_persistent();
        let attr = super::feature_vector(&svc);
        let gone = post(
            &svc,
            "http://example.org/data/iris",
            r#"{"psiType":"attribute-definition","attribute":{"a":"http://example.org/data/iris/flower/species"}}"#,
        )
        .location
        .unwrap();
        assert_eq!(svc.handle(&Request::delete(&gone)).status, 200);
        let joined = post(
            &svc,
            "http://example.org/data/iris/flower/petal/width",
            r#"{"psiType":"composition","join":"http://example.org/transform/square"}"#,
        )
        .location
        .unwrap();
        let predictor = super::train_knn(&svc, Some(1));
        let r = post(
            &svc,
            &format!("{predictor}/update"),
            r#"{"psiType":"value","value":{"target":"virginica","source":[6.05,2.25,4.05,1.05]}}"#,
        );
        assert_eq!(r.status, 303);
        let point = super::json("[6.05,2.25,4.05,1.05]");
        let answer = super::predict(&svc, &predictor, &point);
        assert_eq!(answer, Value::from("virginica"));
        (attr, gone, joined, predictor, answer)
    };

    let svc = boot_persistent();
    let repr = get(&svc, &attr);
    assert_eq!(repr.get("uri"), Some(&Value::from(attr.as_str())));
    assert_eq!(svc.handle(&Request::get(&gone)).status, 404);
    let squares = get(&svc, &format!("{joined}&instance=1"));
    assert!((squares.get("value").unwrap().as_f64().unwrap() - 0.04).abs() < 1e-9);
    let p = get(&svc, &predictor);
    assert!(p.get("provenance").unwrap().get("updated").is_some());
    let point = super::json("[6.05,2.25,4.05,1.05]");
    assert_eq!(super::predict(&svc, &predictor, &point), answer);

    // Fresh creations after a restart do not collide with replayed ones.
    let another = post(
        &svc,
        "http://example.org/data/iris",
        r#"{"psiType":"attribute-definition","attribute":["http://example.org/data/iris/flower/sepal/width"]}"#,
    );
    assert_eq!(another.status, 201);
    assert_ne!(another.location.as_deref(), Some(attr.as_str()));
}
