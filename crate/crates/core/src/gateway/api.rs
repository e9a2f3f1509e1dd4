//! REST surface consumed by the operator UI.

use std::collections::BTreeMap;
use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};
use tokio::sync::oneshot;

use super::cas::parse_cid;
use super::service::{Gateway, GatewayError};
use crate::defsm::DefsmPackage;
use crate::dmn::Value;

/// Longest a long-poll waits for new events.
pub const MAX_WAIT_MS: u64 = 30_000;

struct ApiError(GatewayError);

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError(e)
    }
}

pub fn status_for(code: &str) -> StatusCode {
    match code {
        "UnknownContract" | "UnknownInstance" | "NotFound" => StatusCode::NOT_FOUND,
        "NotEnabled" | "InstanceNotRunning" | "AlreadyDeployed" => StatusCode::CONFLICT,
        "HttpFailure" => StatusCode::BAD_GATEWAY,
        "StorageError" | "Internal" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_for(&self.0.code), Json(json!({"code": self.0.code, "message": self.0.message}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = Arc<Gateway>;

/// Run gateway work off the async executor; it may block on locks or HTTP.
async fn blocking<T: Send + 'static>(
    gw: &Shared,
    f: impl FnOnce(&Gateway) -> Result<T, GatewayError> + Send + 'static,
) -> ApiResult<T> {
    let gw = gw.clone();
    tokio::task::spawn_blocking(move || f(&gw))
        .await
        .map_err(|e| GatewayError::new("Internal", e.to_string()))?
        .map_err(ApiError)
}

async fn list_contracts(State(gw): State<Shared>) -> ApiResult<Json<JsonValue>> {
    let listed = blocking(&gw, |g| {
        g.contracts()
            .into_iter()
            .map(|c| g.package(&c).map(|p| json!({"contract": c, "process": p.process_id})))
            .collect::<Result<Vec<_>, _>>()
    })
    .await?;
    Ok(Json(JsonValue::Array(listed)))
}

async fn get_contract(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let pkg = blocking(&gw, move |g| g.package(&id)).await?;
    Ok(Json(serde_json::from_slice(&pkg.to_bytes()).expect("package is JSON")))
}

async fn deploy(State(gw): State<Shared>, body: Bytes) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let pkg = DefsmPackage::from_bytes(&body).map_err(|e| GatewayError::new("MalformedPackage", e.to_string()))?;
    let id = blocking(&gw, move |g| g.deploy(&pkg)).await?;
    Ok((StatusCode::CREATED, Json(json!({"contract": id}))))
}

async fn start(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let inst = blocking(&gw, move |g| g.start(&id)).await?;
    Ok((StatusCode::CREATED, Json(json!({"instance": inst}))))
}

async fn instance(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let inst = blocking(&gw, move |g| g.instance(&id)).await?;
    Ok(Json(serde_json::to_value(inst).expect("instance serializes")))
}

async fn tasks(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Vec<String>>> {
    Ok(Json(blocking(&gw, move |g| g.tasks(&id)).await?))
}

async fn audit(State(gw): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<JsonValue>> {
    let report = blocking(&gw, move |g| g.audit(&id)).await?;
    Ok(Json(serde_json::to_value(report).expect("audit serializes")))
}

#[derive(Debug, Deserialize)]
struct CompleteBody {
    #[serde(default)]
    params: BTreeMap<String, JsonValue>,
    #[serde(default)]
    doc_cids: Vec<String>,
}

async fn complete(
    State(gw): State<Shared>,
    Path((id, task)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<JsonValue>> {
    let body: CompleteBody = if body.is_empty() {
        CompleteBody { params: BTreeMap::new(), doc_cids: Vec::new() }
    } else {
        serde_json::from_slice(&body).map_err(|e| GatewayError::new("BadArgs", e.to_string()))?
    };
    let mut params = BTreeMap::new();
    for (k, v) in body.params {
        let value = Value::from_json(&v).ok_or_else(|| GatewayError::new("BadArgs", format!("param `{k}` is not a scalar")))?;
        params.insert(k, value);
    }
    let cids = body.doc_cids.iter().map(|c| parse_cid(c)).collect::<Result<Vec<_>, _>>().map_err(GatewayError::from)?;
    let receipt = blocking(&gw, move |g| g.complete(&id, &task, params, &cids)).await?;
    Ok(Json(serde_json::to_value(receipt).expect("receipt serializes")))
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    /// First block height to include.
    #[serde(default)]
    from: u64,
    /// Milliseconds to wait when nothing new is available.
    #[serde(default)]
    wait: u64,
}

async fn events(State(gw): State<Shared>, Path(id): Path<String>, Query(q): Query<EventQuery>) -> ApiResult<Json<JsonValue>> {
    let mut heights = gw.subscribe();
    let deadline = tokio::time::Instant::now() + Duration::from_millis(q.wait.min(MAX_WAIT_MS));
    loop {
        heights.borrow_and_update();
        let (found, next) = gw.events(&id, q.from)?;
        let woke = !found.is_empty() || matches!(tokio::time::timeout_at(deadline, heights.changed()).await, Ok(Ok(())));
        if !woke || !found.is_empty() {
            return Ok(Json(json!({"events": found, "next": next})));
        }
    }
}

async fn put_document(State(gw): State<Shared>, body: Bytes) -> ApiResult<(StatusCode, Json<JsonValue>)> {
    let cid = blocking(&gw, move |g| g.put_document(&body)).await?;
    Ok((StatusCode::CREATED, Json(json!({"cid": cid}))))
}

async fn get_document(State(gw): State<Shared>, Path(cid): Path<String>) -> ApiResult<Response> {
    let cid = parse_cid(&cid).map_err(GatewayError::from)?;
    let bytes = blocking(&gw, move |g| g.document(&cid)).await?;
    Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

async fn state_hash(State(gw): State<Shared>) -> Json<JsonValue> {
    let chain = gw.chain();
    Json(json!({"state_hash": chain.state_hash(), "height": chain.height()}))
}

pub fn router(gw: Shared) -> Router {
    Router::new()
        .route("/contracts", get(list_contracts).post(deploy))
        .route("/contracts/{id}", get(get_contract))
        .route("/contracts/{id}/instances", post(start))
        .route("/instances/{id}", get(instance))
        .route("/instances/{id}/tasks", get(tasks))
        .route("/instances/{id}/tasks/{task}/complete", post(complete))
        .route("/instances/{id}/events", get(events))
        .route("/instances/{id}/audit", get(audit))
        .route("/documents", post(put_document))
        .route("/documents/{cid}", get(get_document))
        .route("/state-hash", get(state_hash))
        .with_state(gw)
}

/// A running API server. Dropping it without [`ServiceHandle::stop`] leaves it running.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    task: tokio::task::JoinHandle<io::Result<()>>,
}

impl ServiceHandle {
    pub async fn stop(self) -> io::Result<()> {
        let _ = self.shutdown.send(());
        self.task.await.map_err(io::Error::other)?
    }

    /// Serve until the process ends.
    pub async fn wait(self) -> io::Result<()> {
        let _keep = self.shutdown;
        self.task.await.map_err(io::Error::other)?
    }
}

/// Bind `addr` (port 0 picks a free one) and serve in the background.
pub async fn serve(gw: Shared, addr: SocketAddr) -> io::Result<ServiceHandle> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let (shutdown, signal) = oneshot::channel::<()>();
    let app = router(gw);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = signal.await;
            })
            .await
    });
    Ok(ServiceHandle { addr, shutdown, task })
}
