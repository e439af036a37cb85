//! HTTP front end: axum in front of [`psi_core::Service::handle`], plus
//! ureq-backed outbound access for remote resources and media types.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use psi_core::client::{FetchError, ResourceClient};
use psi_core::clock::SystemClock;
use psi_core::config::{ConfigError, ServiceConfig};
use psi_core::federation::Federation;
use psi_core::http::Request;
use psi_core::resource::Deps;
use psi_core::schema::validator::{MediaTypeResolver, ResolveError};
use psi_core::{parse_json, serialize_json, Service};
use tokio::net::TcpListener;

/// Environment variable overriding the configured listen address.
pub const ADDR_ENV: &str = "PSI_ADDR";

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("listen on {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

/// GETs remote PSI resources over HTTP.
pub struct HttpClient {
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(timeout: Duration) -> Self {
        HttpClient {
            agent: agent(timeout),
        }
    }
}

impl ResourceClient for HttpClient {
    fn get(&self, uri: &str) -> Result<psi_core::Value, FetchError> {
        let fail = |status: Option<u16>, message: String| FetchError {
            uri: uri.to_string(),
            status,
            message,
        };
        let mut resp = self
            .agent
            .get(uri)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| fail(None, e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(fail(Some(status), format!("status {status}")));
        }
        let text = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_string()
            .map_err(|e| fail(None, e.to_string()))?;
        parse_json(&text).map_err(|e| fail(None, e.to_string()))
    }
}

/// Learns a URI's media type with HEAD, retrying with GET when HEAD is refused.
pub struct HttpResolver {
    agent: ureq::Agent,
}

impl HttpResolver {
    pub fn new(timeout: Duration) -> Self {
        HttpResolver {
            agent: agent(timeout),
        }
    }
}

impl MediaTypeResolver for HttpResolver {
    fn content_type(&self, uri: &str) -> Result<Option<String>, ResolveError> {
        let head = self.agent.head(uri).call();
        let resp = match head {
            Ok(r) if r.status().is_success() => r,
            _ => self
                .agent
                .get(uri)
                .call()
                .map_err(|e| ResolveError(format!("{uri}: {e}")))?,
        };
        if !resp.status().is_success() {
            return Err(ResolveError(format!(
                "{uri}: status {}",
                resp.status().as_u16()
            )));
        }
        Ok(resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(|s| s.split(';').next().unwrap_or(s).trim().to_ascii_lowercase()))
    }
}

/// Scheme and authority of a base URI, without path.
fn origin(base: &str) -> &str {
    let after = base.find("://").map(|i| i + 3).unwrap_or(0);
    match base[after..].find('/') {
        Some(i) => &base[..after + i],
        None => base,
    }
}

pub fn router(svc: Service) -> Router {
    Router::new().fallback(handle).with_state(svc)
}

async fn handle(State(svc): State<Service>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path_and_query().map(|p| p.as_str()).unwrap_or("/");
    let absolute = format!("{}{}", origin(svc.base_uri()), path);
    let body = (!body.is_empty()).then(|| body.to_vec());
    let req = Request::new(method.as_str(), &absolute, body);
    tracing::debug!(method = %req.method, uri = %req.uri, "request");
    let resp = match tokio::task::spawn_blocking(move || svc.handle(&req)).await {
        Ok(r) => r,
        Err(e) => {
            tracing::error!(error = %e, "handler panicked");
            return StatusCode::INTERNAL_SERVER_ERROR.into_response();
        }
    };

    let mut out = Response::new(match resp.body {
        Some(v) => Body::from(serialize_json(&v)),
        None => Body::empty(),
    });
    *out.status_mut() =
        StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let headers = out.headers_mut();
    headers.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("application/json"),
    );
    for (name, value) in [
        (header::LOCATION, resp.location),
        (header::ALLOW, resp.allow),
    ] {
        if let Some(v) = value.and_then(|v| HeaderValue::from_str(&v).ok()) {
            headers.insert(name, v);
        }
    }
    out
}

/// A bound, configured service that has not started accepting yet.
pub struct Bound {
    pub listener: TcpListener,
    pub addr: SocketAddr,
    pub service: Service,
}

/// Binds the configured address (or `PSI_ADDR`) and builds the service. With
/// no explicit base URI the service is published at the bound address, so
/// port 0 works.
pub async fn bind(
    cfg: &ServiceConfig,
    base_dir: &Path,
    federation: Option<Arc<Federation>>,
) -> Result<Bound, ServeError> {
    let addr = std::env::var(ADDR_ENV).unwrap_or_else(|_| cfg.address.clone());
    let listener = TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.clone(),
            source,
        })?;
    let bound = listener.local_addr()?;
    let mut cfg = cfg.clone();
    if cfg.base_uri.is_none() {
        cfg.base_uri = Some(format!("http://{bound}"));
    }
    let timeout = Duration::from_millis(cfg.resolver_timeout_ms);
    let http: Arc<dyn ResourceClient> = Arc::new(HttpClient::new(timeout));
    let federation = federation.unwrap_or_else(|| Arc::new(Federation::new(http)));
    let deps = Deps {
        client: federation.clone(),
        resolver: Arc::new(HttpResolver::new(timeout)),
        clock: Arc::new(SystemClock),
    };
    let base_dir = base_dir.to_path_buf();
    let service = tokio::task::spawn_blocking(move || Service::from_config(&cfg, &base_dir, deps))
        .await
        .map_err(|e| std::io::Error::other(e.to_string()))??;
    federation.add(&service);
    tracing::info!(addr = %bound, base = %service.base_uri(), "service ready");
    Ok(Bound {
        listener,
        addr: bound,
        service,
    })
}

impl Bound {
    pub async fn run(self) -> Result<(), ServeError> {
        axum::serve(self.listener, router(self.service)).await?;
        Ok(())
    }
}

/// Loads a config file and serves it until the process ends.
pub async fn serve(config: &Path) -> Result<(), ServeError> {
    let (cfg, dir) = ServiceConfig::load(config)?;
    bind(&cfg, &dir, None).await?.run().await
}

/// Starts a service on a background runtime thread; returns its entry URI.
/// Used by tests and the conformance harness.
pub fn spawn(cfg: &ServiceConfig, base_dir: &Path) -> Result<String, ServeError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    let bound = rt.block_on(bind(cfg, base_dir, None))?;
    let base = bound.service.base_uri().to_string();
    std::thread::spawn(move || {
        if let Err(e) = rt.block_on(bound.run()) {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok(base)
}
