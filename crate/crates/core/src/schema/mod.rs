//! The PSI schema language: key grammar, composition, templates,
//! compilation to the JSON Schema subset, and validation.

pub mod compat;
pub mod compiler;
pub mod lang;
pub mod predefined;
pub mod template;
pub mod validator;

pub use compiler::{compile, compile_fragment, CompiledSchema, ResolutionContext, SchemaFetcher};
pub use lang::{
    classify_key, compose_array, compose_object, parse_rich_type, ConstraintKey, Reference, Scope,
};
pub use template::{instantiate_template, SchemaTemplate};
pub use validator::{
    validate, validate_psi, validate_rich, MediaTypeResolver, ValidationOutcome, Violation,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed schema: {0}")]
    Malformed(String),
    #[error("unresolved reference ${0}")]
    Unresolved(String),
    #[error("reference cycle through ${0}")]
    Cycle(String),
    #[error("could not fetch schema {address}: {message}")]
    ResolutionIo { address: String, message: String },
    #[error("duplicate key {0:?} in composition")]
    DuplicateKey(String),
}
