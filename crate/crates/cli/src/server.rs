//! JSON-over-HTTP service for the ranking board and operators.
//!
//! | method | path                        | notes                                   |
//! |--------|-----------------------------|-----------------------------------------|
//! | GET    | /healthz                    |                                         |
//! | GET    | /sessions                   | summaries                               |
//! | POST   | /sessions                   | anecdote rows in, blinded summary out   |
//! | GET    | /sessions/{id}/cards        | blinded payload, `ETag` = version       |
//! | PUT    | /sessions/{id}/ordering     | `If-Match: <version>` required          |
//! | POST   | /sessions/{id}/finalize     | `If-Match` optional                     |
//! | POST   | /analyses                   | `X-Arm-Credential` required             |
//! | GET    | /analyses/{id}              |                                         |
//! | POST   | /whatif                     | recomputation against a stored analysis |

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use impact_core::analysis::AnalysisConfig;
use impact_core::anecdote::{AnecdoteRow, Dataset, Lexicon, SelectionPolicy, StudyProtocol};
use impact_core::session::{ArmMap, CardId, SessionKind, SessionOptions, SessionStatus};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::error::ApiError;
use crate::ops;
use crate::store::Store;

pub const ARM_CREDENTIAL_HEADER: &str = "x-arm-credential";

/// Where arm assignments are read from, and the static credential that
/// unlocks them.
#[derive(Debug, Clone, Default)]
pub struct ArmSource {
    pub path: Option<PathBuf>,
    pub credential: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    store: Store,
    arms: ArmSource,
    lexicon: Arc<Lexicon>,
    /// Serializes read-modify-write cycles on stored documents.
    writes: Arc<Mutex<()>>,
}

impl AppState {
    pub fn new(store: Store, arms: ArmSource, lexicon: Lexicon) -> Self {
        AppState {
            store,
            arms,
            lexicon: Arc::new(lexicon),
            writes: Arc::new(Mutex::new(())),
        }
    }

    fn arm_map(&self, headers: &HeaderMap) -> Result<ArmMap, ApiError> {
        let (Some(path), Some(expected)) = (&self.arms.path, &self.arms.credential) else {
            return Err(ApiError::new(
                StatusCode::FORBIDDEN,
                "arm-access-disabled",
                "this service was started without an arm map",
            ));
        };
        let given = headers.get(ARM_CREDENTIAL_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                format!("a valid {ARM_CREDENTIAL_HEADER} header is required to unblind"),
            ));
        }
        Ok(ArmMap::load(path)?)
    }
}

/// `Json` whose rejections render as [`ApiError`].
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(ApiJson(value)),
            Err(rejection) => Err(ApiError::new(rejection.status(), "invalid-request", rejection.body_text())),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}/cards", get(cards))
        .route("/sessions/{id}/ordering", put(put_ordering))
        .route("/sessions/{id}/finalize", post(finalize))
        .route("/analyses", post(create_analysis))
        .route("/analyses/{id}", get(get_analysis))
        .route("/whatif", post(whatif))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method-not-allowed", "method not allowed on this endpoint")
        })
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn healthz() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub kind: SessionKind,
    pub status: SessionStatus,
    pub version: u64,
    pub cards: usize,
}

async fn list_sessions(State(state): State<AppState>) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let sessions = state.store.list_sessions()?;
    Ok(Json(
        sessions
            .iter()
            .map(|s| SessionSummary {
                session_id: s.session_id().to_string(),
                kind: s.kind(),
                status: s.status(),
                version: s.version(),
                cards: s.cards().len(),
            })
            .collect(),
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    pub rows: Vec<AnecdoteRow>,
    #[serde(default = "yes")]
    pub allow_ties: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub interim: bool,
    #[serde(default)]
    pub actor: Option<String>,
    /// Analyze this study day instead of each participant's last blinded
    /// visit.
    #[serde(default)]
    pub visit_day: Option<i64>,
    #[serde(default)]
    pub cgi_declared: bool,
}

fn yes() -> bool {
    true
}

async fn create_session(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<CreateSessionRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let rows = req.rows.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect();
    let dataset = Dataset::from_rows(rows)?;
    let options = SessionOptions {
        allow_ties: req.allow_ties,
        seed: req.seed,
        actor: req.actor.unwrap_or_else(|| SessionOptions::default().actor),
        kind: if req.interim { SessionKind::Interim } else { SessionKind::Full },
    };
    let policy = req.visit_day.map_or(SelectionPolicy::LastBlindedDay, SelectionPolicy::VisitDay);
    let protocol = StudyProtocol {
        cgi_declared: req.cgi_declared,
    };
    let _guard = state.writes.lock().await;
    let created = ops::create_session(&state.store, &dataset, policy, &protocol, &options, &state.lexicon)?;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn cards(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let payload = ops::cards(&state.store, &id)?;
    let etag = format!("\"{}\"", payload.version);
    Ok(([(header::ETAG, etag)], Json(payload)))
}

/// Accepts `3`, `"3"` and `W/"3"`.
fn if_match(headers: &HeaderMap) -> Result<Option<u64>, ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = raw.to_str().unwrap_or_default().trim();
    let text = text.strip_prefix("W/").unwrap_or(text).trim_matches('"');
    text.parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request(format!("If-Match must carry a session version, got {text:?}")))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingRequest {
    /// Best first; cards in one tier are tied.
    pub tiers: Vec<Vec<CardId>>,
    #[serde(default)]
    pub actor: Option<String>,
}

async fn put_ordering(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<OrderingRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let version = if_match(&headers)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "version-required",
            "send the session version you edited in an If-Match header",
        )
    })?;
    let actor = req.actor.unwrap_or_else(|| "chair".into());
    let _guard = state.writes.lock().await;
    let accepted = ops::submit_ordering(&state.store, &id, req.tiers, &actor, Some(version))?;
    let etag = format!("\"{}\"", accepted.version);
    Ok(([(header::ETAG, etag)], Json(accepted)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinalizeRequest {
    pub chair_id: String,
}

async fn finalize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<FinalizeRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let version = if_match(&headers)?;
    let _guard = state.writes.lock().await;
    Ok(Json(ops::finalize(&state.store, &id, &req.chair_id, version)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRequest {
    pub session_id: String,
    #[serde(default)]
    pub analysis_id: Option<String>,
    #[serde(default)]
    pub config: AnalysisConfig,
    #[serde(default)]
    pub actor: Option<String>,
}

async fn create_analysis(
    State(state): State<AppState>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<AnalysisRequest>,
) -> Result<impl IntoResponse, ApiError> {
    let arm_map = state.arm_map(&headers)?;
    let actor = req.actor.unwrap_or_else(|| "statistician".into());
    let _guard = state.writes.lock().await;
    let report = ops::run_analysis(&state.store, &req.session_id, &arm_map, &req.config, req.analysis_id, &actor)?;
    Ok((StatusCode::CREATED, Json(report)))
}

async fn get_analysis(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.store.load_report(&id)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub analysis_id: String,
    pub tiers: Vec<Vec<CardId>>,
}

async fn whatif(State(state): State<AppState>, ApiJson(req): ApiJson<WhatIfRequest>) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(ops::whatif(&state.store, &req.analysis_id, &req.tiers)?))
}
