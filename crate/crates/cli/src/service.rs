//! HTTP JSON API over preloaded summaries.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use maxent_core::query::{self, QueryError};
use maxent_core::schema::AttributeKind;
use maxent_core::summary::{Summary, SummaryError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub port: u16,
    /// `(id, path)` of every summary to preload.
    pub summaries: Vec<(String, PathBuf)>,
    pub max_concurrent: usize,
    pub timeout_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8080,
            summaries: Vec::new(),
            max_concurrent: 8,
            timeout_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    ParseError,
    UnknownSummary,
    PlanTooLarge,
    Internal,
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: ErrorCode,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    fn unknown_summary(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, ErrorCode::UnknownSummary, format!("no summary with id `{id}`"))
            .with_detail(json!({ "id": id }))
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match &e {
            QueryError::PlanTooLarge { groups, max } => {
                ApiError::new(StatusCode::BAD_REQUEST, ErrorCode::PlanTooLarge, e.to_string())
                    .with_detail(json!({ "groups": groups.to_string(), "max": max.to_string() }))
            }
            QueryError::Parse(p) => ApiError::new(StatusCode::BAD_REQUEST, ErrorCode::ParseError, e.to_string())
                .with_detail(json!({ "position": p.position })),
            _ if e.is_user_error() => ApiError::new(StatusCode::BAD_REQUEST, ErrorCode::ParseError, e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::Internal, e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

type Catalog = BTreeMap<String, Arc<Summary>>;

/// Shared, read-mostly service state.
pub struct AppState {
    catalog: RwLock<Arc<Catalog>>,
    sources: Vec<(String, PathBuf)>,
    limiter: Semaphore,
    timeout: Duration,
    pub queries_served: AtomicU64,
    pub queries_failed: AtomicU64,
}

/// Loads every summary; each load recomputes and checks P.
pub fn load_catalog(sources: &[(String, PathBuf)]) -> Result<Catalog, SummaryError> {
    let mut out = BTreeMap::new();
    for (id, path) in sources {
        let summary = Summary::load(path)?;
        log::info!("loaded summary `{id}` from {}", path.display());
        out.insert(id.clone(), Arc::new(summary));
    }
    Ok(out)
}

impl AppState {
    pub fn new(catalog: Catalog, config: &ServiceConfig) -> Self {
        AppState {
            catalog: RwLock::new(Arc::new(catalog)),
            sources: config.summaries.clone(),
            limiter: Semaphore::new(config.max_concurrent.max(1)),
            timeout: Duration::from_millis(config.timeout_ms),
            queries_served: AtomicU64::new(0),
            queries_failed: AtomicU64::new(0),
        }
    }

    pub fn load(config: &ServiceConfig) -> Result<Self, SummaryError> {
        Ok(AppState::new(load_catalog(&config.summaries)?, config))
    }

    fn catalog(&self) -> Arc<Catalog> {
        self.catalog.read().expect("catalog lock").clone()
    }

    fn summary(&self, id: &str) -> Result<Arc<Summary>, ApiError> {
        self.catalog().get(id).cloned().ok_or_else(|| ApiError::unknown_summary(id))
    }

    /// Re-reads the configured paths. On any failure the old catalog stays.
    pub fn reload(&self) -> Result<usize, SummaryError> {
        let fresh = load_catalog(&self.sources)?;
        let count = fresh.len();
        *self.catalog.write().expect("catalog lock") = Arc::new(fresh);
        Ok(count)
    }
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    pub sql: String,
    /// Set to false to drop `wall_ms`, making identical queries return
    /// identical bytes.
    #[serde(default = "yes")]
    pub timing: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Serialize)]
struct GroupOut<'a> {
    values: &'a [String],
    raw: f64,
    rounded: u64,
}

#[derive(Debug, Serialize)]
struct QueryOut<'a> {
    columns: &'a [String],
    groups: Vec<GroupOut<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_ms: Option<f64>,
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "summaries": state.catalog().len(),
        "queries_served": state.queries_served.load(Ordering::Relaxed),
        "queries_failed": state.queries_failed.load(Ordering::Relaxed),
    }))
}

fn listing(id: &str, s: &Summary) -> Value {
    let meta = s.meta();
    json!({
        "id": id,
        "n": s.n(),
        "attributes": s.schema().attributes.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(),
        "statistics": s.statistics().len(),
        "pairs": meta.chosen_pairs,
        "heuristic": meta.heuristic,
        "strategy": meta.strategy,
        "per_pair": meta.per_pair,
        "converged": meta.converged,
        "max_residual": meta.max_residual,
        "size": meta.size,
    })
}

async fn list_summaries(State(state): State<Arc<AppState>>) -> Json<Value> {
    let catalog = state.catalog();
    Json(Value::Array(catalog.iter().map(|(id, s)| listing(id, s)).collect()))
}

async fn schema(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = state.summary(&id)?;
    let stats = s.statistics();
    let attrs: Vec<Value> = s
        .schema()
        .attributes
        .iter()
        .map(|a| {
            let mut v = json!({ "name": a.name, "size": a.size() });
            match &a.kind {
                AttributeKind::Categorical { values } => {
                    v["kind"] = json!("categorical");
                    v["labels"] = json!(values);
                }
                AttributeKind::Numeric { lo, hi, buckets } => {
                    v["kind"] = json!("numeric");
                    v["lo"] = json!(lo);
                    v["hi"] = json!(hi);
                    v["buckets"] = json!(buckets);
                    v["labels"] = json!((0..*buckets).map(|b| a.label(b)).collect::<Vec<_>>());
                }
            }
            v
        })
        .collect();
    let names = &s.schema().attributes;
    let two_d: Vec<Value> = stats
        .pair_groups()
        .iter()
        .map(|g| {
            json!({
                "attributes": [names[g.pair.0].name, names[g.pair.1].name],
                "statistics": g.ids.len(),
            })
        })
        .collect();
    Ok(Json(json!({
        "id": id,
        "n": s.n(),
        "attributes": attrs,
        "two_d": two_d,
    })))
}

async fn run_query(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let result = answer(&state, &id, body).await;
    let counter = if result.is_ok() {
        &state.queries_served
    } else {
        &state.queries_failed
    };
    counter.fetch_add(1, Ordering::Relaxed);
    result
}

async fn answer(
    state: &AppState,
    id: &str,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(req) = body.map_err(|e| {
        ApiError::new(StatusCode::BAD_REQUEST, ErrorCode::ParseError, format!("bad request body: {}", e.body_text()))
    })?;
    let summary = state.summary(id)?;
    let _permit = state
        .limiter
        .acquire()
        .await
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, ErrorCode::Internal, "service is shutting down"))?;
    let sql = req.sql.clone();
    let work = tokio::task::spawn_blocking(move || query::run_sql(&summary, &sql));
    let answer = match tokio::time::timeout(state.timeout, work).await {
        Err(_) => {
            return Err(ApiError::new(StatusCode::GATEWAY_TIMEOUT, ErrorCode::Internal, "query timed out")
                .with_detail(json!({ "timeout_ms": state.timeout.as_millis() as u64 })))
        }
        Ok(Err(join)) => {
            return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::Internal, join.to_string()))
        }
        Ok(Ok(result)) => result?,
    };
    let out = QueryOut {
        columns: &answer.columns,
        groups: answer
            .groups
            .iter()
            .map(|g| GroupOut {
                values: &g.values,
                raw: g.raw,
                rounded: g.rounded,
            })
            .collect(),
        wall_ms: req.timing.then_some(answer.wall_ms),
    };
    Ok(Json(out).into_response())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, ErrorCode::Internal, "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/summaries", get(list_summaries))
        .route("/summaries/{id}/schema", get(schema))
        .route("/summaries/{id}/query", post(run_query))
        .fallback(not_found)
        .with_state(state)
}

#[cfg(unix)]
async fn reload_on_hangup(state: Arc<AppState>) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hup) = signal(SignalKind::hangup()) else {
        log::warn!("cannot listen for SIGHUP; reload disabled");
        return;
    };
    while hup.recv().await.is_some() {
        match state.reload() {
            Ok(n) => log::info!("reloaded {n} summaries"),
            Err(e) => log::error!("reload failed, keeping previous summaries: {e}"),
        }
    }
}

/// Binds, preloads and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> Result<(), crate::CliError> {
    let state = Arc::new(AppState::load(&config).map_err(maxent_core::Error::from)?);
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port))
        .await
        .map_err(|e| crate::CliError::Service(format!("cannot bind port {}: {e}", config.port)))?;
    let addr = listener.local_addr().map_err(|e| crate::CliError::Service(e.to_string()))?;
    log::info!("listening on {addr}");
    println!("listening on {addr}");
    #[cfg(unix)]
    tokio::spawn(reload_on_hangup(state.clone()));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| crate::CliError::Service(e.to_string()))
}
