//! Reference learners and transformers.

pub mod knn;
pub mod stubs;
pub mod transforms;

use std::sync::Arc;
use std::time::Duration;

use crate::error::Error;
use crate::value::{parse_json, Mapping, Value};

/// A trained, possibly updatable, model behind a predictor resource.
pub trait Model: Send + Sync {
    fn predict(&self, input: &Value) -> Result<Value, Error>;

    /// Returns the model after absorbing `values`, each already valid for
    /// the predictor's update schema.
    fn update(&self, _values: &[Value]) -> Result<Arc<dyn Model>, Error> {
        Err(Error::Forbidden("this predictor cannot be updated".into()))
    }

    /// Serializable state, restored by [`Learner::restore`].
    fn snapshot(&self) -> Value;
}

pub struct Trained {
    pub model: Arc<dyn Model>,
    pub accepts: Value,
    pub emits: Value,
    pub update_schema: Option<Value>,
    pub description: String,
    /// Short name of the training data, used in the predictor's URI.
    pub tag: String,
}

/// What a learner sees of a validated task.
pub struct TaskInput<'a> {
    /// The task with defaults filled in; resources still hold `$URI` strings.
    pub task: &'a Mapping,
    /// Dereferenced representation of each task resource.
    pub resources: &'a Mapping,
    /// GETs any resource, local or remote.
    pub fetch: &'a dyn Fn(&str) -> Result<Value, Error>,
}

pub trait Learner: Send + Sync {
    fn description(&self) -> String;

    fn task_schema(&self) -> Value;

    fn train(&self, input: &TaskInput<'_>) -> Result<Trained, Error>;

    /// Learners that answer 202 and only publish the predictor later.
    fn training_delay(&self) -> Option<Duration> {
        None
    }

    fn restore(&self, snapshot: &Value) -> Result<Arc<dyn Model>, Error>;
}

/// Learner names known to configuration files.
pub fn builtin_learner(kind: &str, delay: Option<Duration>) -> Option<Arc<dyn Learner>> {
    let learner: Arc<dyn Learner> = match kind {
        "knn" => match delay {
            Some(d) => Arc::new(knn::Knn::delayed(d)),
            None => Arc::new(knn::Knn::new()),
        },
        "c45" => Arc::new(stubs::c45()),
        "naivebayes" => Arc::new(stubs::naive_bayes()),
        "imageclass" => Arc::new(stubs::image_class()),
        _ => return None,
    };
    Some(learner)
}

pub(crate) fn schema(text: &str) -> Value {
    parse_json(text).expect("built-in schema is valid JSON")
}
