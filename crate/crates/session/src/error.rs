use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("no session {0:?}")]
    SessionNotFound(String),

    #[error("session {0} is finished")]
    SessionFinished(String),

    #[error("{0}")]
    InvalidRequest(String),

    #[error("session log integrity: {0}")]
    Integrity(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] seqteach::Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownDataset(_) => "unknown_dataset",
            Self::SessionNotFound(_) => "session_not_found",
            Self::SessionFinished(_) => "session_finished",
            Self::InvalidRequest(_) => "invalid_request",
            Self::Integrity(_) => "integrity_error",
            Self::Config(_) => "configuration_error",
            Self::Model(_) => "model_error",
            Self::Io(_) => "io_error",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::UnknownDataset(_) | Self::SessionNotFound(_) => StatusCode::NOT_FOUND,
            Self::SessionFinished(_) => StatusCode::CONFLICT,
            Self::InvalidRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "code": self.code(), "message": self.to_string() } });
        (self.status(), Json(body)).into_response()
    }
}
