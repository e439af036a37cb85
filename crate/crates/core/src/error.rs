use crate::schema::SchemaError;
use crate::value::{Mapping, Value};

/// Failure of a resource operation, classified by the HTTP status it maps to.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("{message}")]
    BadRequest {
        message: String,
        detail: Option<Value>,
    },
    #[error("{0}")]
    Forbidden(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    MethodNotAllowed(String),
    #[error("{0}")]
    NotImplemented(String),
    #[error("{0}")]
    Internal(String),
}

impl Error {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Error::BadRequest {
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(message: impl Into<String>, detail: Value) -> Self {
        Error::BadRequest {
            message: message.into(),
            detail: Some(detail),
        }
    }

    pub fn status(&self) -> u16 {
        match self {
            Error::BadRequest { .. } => 400,
            Error::Forbidden(_) => 403,
            Error::NotFound(_) => 404,
            Error::MethodNotAllowed(_) => 405,
            Error::Internal(_) => 500,
            Error::NotImplemented(_) => 501,
        }
    }

    /// `{"psiType":"error","message":…,"detail"?:…}`
    pub fn body(&self) -> Value {
        let mut m = Mapping::new();
        m.insert("psiType".into(), "error".into());
        m.insert("message".into(), self.to_string().into());
        if let Error::BadRequest {
            detail: Some(detail),
            ..
        } = self
        {
            m.insert("detail".into(), detail.clone());
        }
        Value::Object(m)
    }
}

impl From<SchemaError> for Error {
    fn from(e: SchemaError) -> Self {
        Error::bad_request(e.to_string())
    }
}
