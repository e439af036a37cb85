//! Core of a PSI inference service: the value model, the schema language
//! and its compiler, resources, and the reference learners.

pub mod client;
pub mod clock;
pub mod config;
pub mod datauri;
pub mod error;
pub mod federation;
pub mod fold;
pub mod http;
pub mod ingest;
pub mod journal;
pub mod learners;
pub mod query;
pub mod resource;
pub mod schema;
pub mod value;

pub use error::Error;
pub use resource::Service;
pub use value::{parse_json, serialize_json, Mapping, Value};
