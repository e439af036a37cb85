//! Routes GETs between services living in one process, falling back to a
//! network client for everything else.

use std::sync::{Arc, RwLock};

use crate::client::{FetchError, NoNetwork, ResourceClient};
use crate::resource::{Service, WeakService};
use crate::value::Value;

pub struct Federation {
    members: RwLock<Vec<WeakService>>,
    fallback: Arc<dyn ResourceClient>,
}

impl Federation {
    pub fn new(fallback: Arc<dyn ResourceClient>) -> Self {
        Federation {
            members: RwLock::new(Vec::new()),
            fallback,
        }
    }

    /// A federation that cannot leave the process.
    pub fn offline() -> Self {
        Self::new(Arc::new(NoNetwork))
    }

    pub fn add(&self, svc: &Service) {
        self.members
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .push(svc.downgrade());
    }

    fn member_for(&self, uri: &str) -> Option<Service> {
        self.members
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter_map(WeakService::upgrade)
            .find(|s| s.is_local(uri))
    }
}

impl ResourceClient for Federation {
    fn get(&self, uri: &str) -> Result<Value, FetchError> {
        match self.member_for(uri) {
            Some(svc) => svc.get(uri).map_err(|e| FetchError {
                uri: uri.to_string(),
                status: Some(e.status()),
                message: e.to_string(),
            }),
            None => self.fallback.get(uri),
        }
    }
}
