//! Learners that are listed but not implemented; processing a task for
//! them answers 501.

use std::sync::Arc;

use super::{schema, Learner, Model, TaskInput, Trained};
use crate::error::Error;
use crate::value::Value;

pub struct Unimplemented {
    name: &'static str,
    description: &'static str,
    task_schema: &'static str,
}

impl Learner for Unimplemented {
    fn description(&self) -> String {
        self.description.to_string()
    }

    fn task_schema(&self) -> Value {
        schema(self.task_schema)
    }

    fn train(&self, _input: &TaskInput<'_>) -> Result<Trained, Error> {
        Err(Error::NotImplemented(format!(
            "the {} learner is not implemented by this service",
            self.name
        )))
    }

    fn restore(&self, _snapshot: &Value) -> Result<Arc<dyn Model>, Error> {
        Err(Error::NotImplemented(format!(
            "the {} learner has no models",
            self.name
        )))
    }
}

pub fn c45() -> Unimplemented {
    Unimplemented {
        name: "c45",
        description: "C4.5 decision tree learner over atomic feature vectors",
        task_schema: r#"{
  "/resources": {
    "/target": { "$nominalAttribute": { "allItems": "$string" } },
    "/source": { "$arrayAttribute": { "allItems": "$atomicValueSchema" } }
  }
}"#,
    }
}

pub fn naive_bayes() -> Unimplemented {
    Unimplemented {
        name: "naivebayes",
        description: "Naive Bayes classifier over atomic feature vectors",
        task_schema: r#"{
  "/resources": {
    "/target": { "$nominalAttribute": { "allItems": "$string" } },
    "/source": { "$arrayAttribute": { "allItems": "$atomicValueSchema" } }
  }
}"#,
    }
}

pub fn image_class() -> Unimplemented {
    Unimplemented {
        name: "imageclass",
        description: "Supervised classifier of JPEG images using colour and shape information",
        task_schema: r#"{
  "/resources": {
    "/target": { "$nominalAttribute": { "allItems": "$string" } },
    "/source": { "$richValueAttribute": { "mediaType": "image/jpeg" } }
  }
}"#,
    }
}
