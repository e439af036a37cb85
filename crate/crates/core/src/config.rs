//! Service configuration file and assembly of a [`Service`] from it.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use crate::clock::iso_minutes;
use crate::ingest::{ingest, IngestError, IngestOptions};
use crate::journal::JournalError;
use crate::learners::builtin_learner;
use crate::learners::transforms::builtin_transform;
use crate::resource::ops::PredictorView;
use crate::resource::{Collection, Deps, ReadyPredictor, Roots, Service, Settings, TaskOutcome};
use crate::value::{Mapping, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("{0}")]
    Invalid(String),
}

/// Which resource kinds a deployment offers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Full,
    /// Relations, their attributes, and the schema collection.
    DataOnly,
    /// Pre-trained predictors only.
    PredictorOnly,
}

impl Profile {
    pub fn collections(self) -> Vec<Collection> {
        match self {
            Profile::Full => Collection::ALL.to_vec(),
            Profile::DataOnly => vec![Collection::Relations, Collection::Schema],
            Profile::PredictorOnly => vec![Collection::Predictors],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LearnerConfig {
    Name(String),
    #[serde(rename_all = "camelCase")]
    Detailed {
        name: String,
        /// Built-in learner behind the name; defaults to the name.
        #[serde(default)]
        kind: Option<String>,
        /// Publish predictors only after this many milliseconds (202 path).
        #[serde(default)]
        delay_ms: Option<u64>,
    },
}

impl LearnerConfig {
    fn parts(&self) -> (&str, &str, Option<Duration>) {
        match self {
            LearnerConfig::Name(n) => (n, n, None),
            LearnerConfig::Detailed {
                name,
                kind,
                delay_ms,
            } => (
                name,
                kind.as_deref().unwrap_or(name),
                delay_ms.map(Duration::from_millis),
            ),
        }
    }
}

/// A predictor trained at startup and published without its training data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainedConfig {
    pub name: String,
    pub learner: String,
    /// Manifest of the training relation.
    pub relation: PathBuf,
    /// Task; resource entries may name attributes relative to the relation.
    pub task: serde_json::Value,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_address")]
    pub address: String,
    /// Public entry URI; `http://{address}` when absent.
    #[serde(default)]
    pub base_uri: Option<String>,
    #[serde(default)]
    pub profile: Profile,
    /// Overrides the collections the profile advertises.
    #[serde(default)]
    pub collections: Option<Vec<Collection>>,
    #[serde(default)]
    pub roots: Roots,
    /// Relation manifests, relative to the config file.
    #[serde(default)]
    pub relations: Vec<PathBuf>,
    #[serde(default = "default_learners")]
    pub learners: Vec<LearnerConfig>,
    #[serde(default = "default_transformers")]
    pub transformers: Vec<String>,
    #[serde(default)]
    pub pretrained: Vec<PretrainedConfig>,
    #[serde(default)]
    pub related_services: Vec<serde_json::Value>,
    /// Journal of client-made changes, relative to the config file.
    #[serde(default)]
    pub persistence: Option<PathBuf>,
    #[serde(default)]
    pub immutable_predictors: bool,
    /// Embed every rich-valued column as data URIs.
    #[serde(default)]
    pub inline_rich_values: bool,
    #[serde(default = "default_timeout")]
    pub resolver_timeout_ms: u64,
}

fn default_address() -> String {
    "127.0.0.1:8080".into()
}

fn default_learners() -> Vec<LearnerConfig> {
    ["c45", "imageclass", "knn", "naivebayes"]
        .into_iter()
        .map(|n| LearnerConfig::Name(n.into()))
        .collect()
}

fn default_transformers() -> Vec<String> {
    vec!["square".into(), "average".into()]
}

fn default_timeout() -> u64 {
    3000
}

impl Default for ServiceConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ServiceConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads a config file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text, path)?, dir))
    }

    pub fn base_uri(&self) -> String {
        self.base_uri
            .clone()
            .unwrap_or_else(|| format!("http://{}", self.address))
            .trim_end_matches('/')
            .to_string()
    }
}

fn to_value(v: &serde_json::Value) -> Result<Value, ConfigError> {
    Value::from_json(v.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))
}

impl Service {
    /// Builds a service from configuration, ingesting relations, training
    /// pre-trained predictors and replaying the journal.
    pub fn from_config(
        cfg: &ServiceConfig,
        base_dir: &Path,
        deps: Deps,
    ) -> Result<Service, ConfigError> {
        let mut settings = Settings::new(&cfg.base_uri());
        settings.roots = cfg.roots.clone();
        settings.exposed = cfg
            .collections
            .clone()
            .unwrap_or_else(|| cfg.profile.collections());
        settings.immutable_predictors = cfg.immutable_predictors;
        settings.related_services = cfg
            .related_services
            .iter()
            .map(to_value)
            .collect::<Result<_, _>>()?;
        let svc = Service::new(settings, deps.clone());
        let opts = IngestOptions {
            inline_rich: cfg.inline_rich_values,
        };

        if cfg.profile != Profile::PredictorOnly {
            for manifest in &cfg.relations {
                let rel = ingest(&base_dir.join(manifest), opts)?;
                svc.add_relation(&rel)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            }
        }
        if cfg.profile == Profile::Full {
            for name in &cfg.transformers {
                let t = builtin_transform(name)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown transformer {name}")))?;
                svc.add_transformer(name, t);
            }
            for l in &cfg.learners {
                let (name, kind, delay) = l.parts();
                let learner = builtin_learner(kind, delay)
                    .ok_or_else(|| ConfigError::Invalid(format!("unknown learner {kind}")))?;
                svc.add_learner(name, kind, learner);
            }
        }
        for p in &cfg.pretrained {
            svc.install_pretrained(p, base_dir, opts, &deps)?;
        }
        if let Some(journal) = &cfg.persistence {
            svc.open_journal(&base_dir.join(journal))?;
        }
        Ok(svc)
    }

    fn install_pretrained(
        &self,
        p: &PretrainedConfig,
        base_dir: &Path,
        opts: IngestOptions,
        deps: &Deps,
    ) -> Result<(), ConfigError> {
        let fail =
            |e: crate::error::Error| ConfigError::Invalid(format!("pretrained {}: {e}", p.name));
        let private = Service::new(Settings::new("http://private.invalid"), deps.clone());
        let rel = ingest(&base_dir.join(&p.relation), opts)?;
        let rel_uri = private.add_relation(&rel).map_err(fail)?;
        let learner = builtin_learner(&p.learner, None)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown learner {}", p.learner)))?;
        let learner_uri = private.add_learner(&p.learner, &p.learner, learner);

        let task = to_value(&p.task)?;
        let mut resolved = task.clone();
        if let Some(Value::Object(resources)) = resolved
            .as_object_mut()
            .and_then(|m| m.get_mut("resources"))
        {
            for r in resources.values_mut() {
                if let Value::String(s) = r {
                    if !s.starts_with('$') {
                        *s = format!("${rel_uri}/{s}");
                    }
                }
            }
        }
        let mut body = Mapping::new();
        body.insert("psiType".into(), "task".into());
        body.insert("task".into(), resolved);
        let entry = private.learner(&learner_uri).expect("just added");
        let uri = match private
            .process_task(&entry, &Value::Object(body))
            .map_err(fail)?
        {
            TaskOutcome::Created(u) | TaskOutcome::Accepted(u) => u,
        };
        let trained = private.predictor(&uri).expect("just trained");
        let PredictorView::Ready(r) = private.predictor_view(&trained) else {
            return Err(ConfigError::Invalid(format!(
                "pretrained {} is still training",
                p.name
            )));
        };

        let mut provenance = Mapping::new();
        provenance.insert("created".into(), iso_minutes(self.now()).into());
        provenance.insert("createdBy".into(), "system".into());
        provenance.insert("task".into(), task);
        let public = format!("{}/{}", self.collection_uri(Collection::Predictors), p.name);
        self.install_predictor(
            &public,
            None,
            &p.learner,
            ReadyPredictor {
                description: r.description.clone(),
                accepts: r.accepts.clone(),
                emits: r.emits.clone(),
                provenance,
                model: Arc::clone(&r.model),
                update_schema: None,
            },
        );
        tracing::info!(uri = %public, "pretrained predictor installed");
        Ok(())
    }
}
