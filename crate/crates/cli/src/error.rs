use std::fmt;

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use impact_core::analysis::AnalysisError;
use impact_core::anecdote::{IngestError, QualityError};
use impact_core::session::SessionError;
use impact_core::sim::SimError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// The single error shape returned by every failed command or request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
    #[serde(skip, default = "internal")]
    pub status: StatusCode,
}

fn internal() -> StatusCode {
    StatusCode::INTERNAL_SERVER_ERROR
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            code: code.into(),
            message: message.into(),
            detail: None,
            status,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid-request", message)
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not-found", format!("{what} {id} does not exist"))
    }

    pub fn io(context: impl fmt::Display, err: std::io::Error) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", format!("{context}: {err}"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ApiError serializes")
    }
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let message = e.to_string();
        let unprocessable = |code| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message.clone());
        match e {
            VersionConflict { expected, actual } => {
                ApiError::new(StatusCode::CONFLICT, "version-conflict", message)
                    .with_detail(json!({ "expected": expected, "actual": actual, "retryable": true }))
            }
            WrongStatus { .. } | NoDraft => ApiError::new(StatusCode::CONFLICT, "invalid-state", message),
            QualityFailed { anecdote_id, report } => unprocessable("quality-failed")
                .with_detail(json!({ "anecdote_id": anecdote_id, "report": report })),
            TooFewAnecdotes(_) | DuplicateParticipant(_) | NotSelected(_) => unprocessable("invalid-cohort"),
            UnknownCard(_) | DuplicateCard(_) | MissingCards(_) | TiesNotAllowed { .. } | RankImport { .. } => {
                unprocessable("invalid-ordering")
            }
            SealedMismatch | MissingArmAssignments { .. } | ArmMap(_) => unprocessable("arm-map"),
            Document(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "corrupt-document", message),
            Quality(_) => ApiError::bad_request(message),
            Stats(_) => unprocessable("statistics"),
        }
    }
}

impl From<AnalysisError> for ApiError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Session(e) => e.into(),
            AnalysisError::Degenerate => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "degenerate-ranking", e.to_string())
            }
            AnalysisError::InvalidArgument(_) => ApiError::bad_request(e.to_string()),
            AnalysisError::Stats(_) | AnalysisError::UnlabeledCard(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "statistics", e.to_string())
            }
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let code = if matches!(e, IngestError::Io { .. }) { "io" } else { "invalid-records" };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string())
    }
}

impl From<QualityError> for ApiError {
    fn from(e: QualityError) -> Self {
        ApiError::bad_request(e.to_string())
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        let code = if matches!(e, SimError::Io(_)) { "io" } else { "invalid-simulation" };
        ApiError::new(StatusCode::BAD_REQUEST, code, e.to_string())
    }
}
