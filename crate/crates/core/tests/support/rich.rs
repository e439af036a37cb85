//! Rich-value checks; HTTP lookups go to a stub resolver.

use std::sync::Mutex;

use psi_core::schema::validator::{
    validate_rich, validate_with_resolver, MediaTypeResolver, OfflineResolver, ResolveError,
};
use psi_core::Value;

use super::{get, json, world};

const DATA_URI: &str = "data:image/jpeg;base64,/9j/4AAQSkZJRgABAQEA";
const WIKIMEDIA: &str =
    "http://upload.wikimedia.org/wikipedia/commons/5/56/Kosaciec_szczecinkowaty_Iris_setosa.jpg";

/// Answers every lookup with a fixed Content-Type and remembers what it
/// was asked.
struct Stub {
    answer: Result<Option<&'static str>, &'static str>,
    asked: Mutex<Vec<String>>,
}

impl Stub {
    fn new(answer: Result<Option<&'static str>, &'static str>) -> Self {
        Stub {
            answer,
            asked: Mutex::new(Vec::new()),
        }
    }
}

impl MediaTypeResolver for Stub {
    fn content_type(&self, uri: &str) -> Result<Option<String>, ResolveError> {
        self.asked.lock().unwrap().push(uri.to_string());
        self.answer
            .map(|t| t.map(str::to_string))
            .map_err(|e| ResolveError(e.into()))
    }
}

pub fn data_uri_validates_against_its_media_type() {
    let w = world();
    let schema = w.svc.compile(&Value::from("@image/jpeg")).unwrap();
    let stub = Stub::new(Err("must not be asked"));
    assert!(validate_with_resolver(&Value::from(DATA_URI), &schema, &stub).is_valid());
    assert!(validate_rich(&Value::from(DATA_URI), "image/jpeg", &OfflineResolver).is_valid());
    assert!(
        stub.asked.lock().unwrap().is_empty(),
        "data URIs need no lookup"
    );

    for bad in [
        "data:image/png;base64,iVBORw0KGgo",
        "data:text/plain,hello",
        "data:image/jpeg;base64",
        "ftp://example.org/iris.jpg",
    ] {
        let outcome = validate_with_resolver(&Value::from(bad), &schema, &stub);
        assert!(!outcome.is_valid(), "{bad}");
    }
    assert!(!validate_with_resolver(&Value::Integer(3), &schema, &stub).is_valid());
}

pub fn http_uri_uses_the_resolver() {
    let jpeg = Stub::new(Ok(Some("image/jpeg")));
    assert!(validate_rich(&Value::from(WIKIMEDIA), "image/jpeg", &jpeg).is_valid());
    assert_eq!(*jpeg.asked.lock().unwrap(), vec![WIKIMEDIA.to_string()]);

    let with_params = Stub::new(Ok(Some("Image/JPEG; charset=binary")));
    assert!(validate_rich(&Value::from(WIKIMEDIA), "image/jpeg", &with_params).is_valid());

    for (answer, why) in [
        (Ok(Some("image/png")), "wrong type"),
        (Ok(Some("text/html")), "wrong type"),
        (Ok(None), "no Content-Type"),
        (Err("connection refused"), "unreachable"),
    ] {
        let stub = Stub::new(answer);
        let outcome = validate_rich(&Value::from(WIKIMEDIA), "image/jpeg", &stub);
        assert!(!outcome.is_valid(), "{why}");
        assert!(!outcome.summary().is_empty());
    }
    assert!(!validate_rich(&Value::from(WIKIMEDIA), "image/jpeg", &OfflineResolver).is_valid());
}

pub fn rich_values_inside_structures() {
    let w = world();
    let schema = w
        .svc
        .compile(&json(r#"{"/photo":"@image/jpeg","/species":"$string"}"#))
        .unwrap();
    let jpeg = Stub::new(Ok(Some("image/jpeg")));
    let ok = json(&format!(r#"{{"photo":"{WIKIMEDIA}","species":"setosa"}}"#));
    assert!(validate_with_resolver(&ok, &schema, &jpeg).is_valid());
    let png = Stub::new(Ok(Some("image/png")));
    let outcome = validate_with_resolver(&ok, &schema, &png);
    assert!(!outcome.is_valid());
    assert!(outcome.summary().contains("photo"), "{}", outcome.summary());
}

pub fn served_image_attribute_emits_data_uris() {
    let w = world();
    let attr = get(&w.svc, "http://example.org/data/iris/image");
    let emits = w.svc.compile(attr.get("emits").unwrap()).unwrap();
    let all = get(&w.svc, "http://example.org/data/iris/image?instance=all");
    let list = all.get("valueList").unwrap().as_array().unwrap();
    assert_eq!(list.len(), 150);
    for v in list.iter().step_by(10) {
        assert!(v.as_str().unwrap().starts_with("data:image/jpeg;base64,"));
        assert!(validate_with_resolver(v, &emits, &OfflineResolver).is_valid());
        assert!(validate_rich(v, "image/jpeg", &OfflineResolver).is_valid());
        assert!(!validate_rich(v, "image/png", &OfflineResolver).is_valid());
    }
}
