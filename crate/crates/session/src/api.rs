//! HTTP routes.
//!
//! Answers to one session are serialized: a second answer that arrives
//! while one is being processed waits for it, then applies to the session
//! as the first one left it.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::dataset::Registry;
use crate::error::ServiceError;
use crate::session::{CreateRequest, Session, SessionResult, SessionView, Status, Word};
use crate::store::{LogRecord, SessionStore};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Dataset registry file; the built-in registry when absent.
    pub registry: Option<PathBuf>,
}

type Slot = Arc<Mutex<Result<Session, String>>>;

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    registry: Registry,
    store: SessionStore,
    sessions: RwLock<HashMap<String, Slot>>,
}

impl AppState {
    /// Loads the registry and replays every session log in the data directory.
    /// Sessions whose logs fail to replay stay listed and report the failure.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let registry = Registry::load(config.registry.as_deref())?;
        let store = SessionStore::open(&config.data_dir)?;
        let mut sessions = HashMap::new();
        for id in store.ids()? {
            let slot = store.replay(&id, &registry).map_err(|e| e.to_string());
            if let Err(msg) = &slot {
                tracing::warn!(session = %id, "replay failed: {msg}");
            }
            sessions.insert(id, Arc::new(Mutex::new(slot)));
        }
        Ok(Self {
            inner: Arc::new(Inner {
                registry,
                store,
                sessions: RwLock::new(sessions),
            }),
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.inner.registry
    }

    fn slot(&self, id: &str) -> Result<Slot, ServiceError> {
        self.inner
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::SessionNotFound(id.to_string()))
    }

    /// Confirms the on-disk log still accounts for every answer held in memory.
    fn check_log(&self, session: &Session) -> Result<(), ServiceError> {
        let logged = self.inner.store.answered(session.id())?;
        if logged != session.answered() {
            return Err(ServiceError::Integrity(format!(
                "session {} has {} answers but its log records {logged}",
                session.id(),
                session.answered()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub n_words: usize,
    pub length_scale: f64,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub y: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub status: Status,
    pub answered: usize,
    pub question: Option<Word>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<SessionResult>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/datasets", get(list_datasets))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/answers", post(post_answer))
        .route("/sessions/{id}/result", get(get_result))
        .with_state(state)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::InvalidRequest(e.body_text()))
}

async fn list_datasets(State(state): State<AppState>) -> Json<Vec<DatasetInfo>> {
    Json(
        state
            .registry()
            .iter()
            .map(|d| DatasetInfo {
                id: d.id.clone(),
                n_words: d.len(),
                length_scale: d.length_scale,
                words: d.words().to_vec(),
            })
            .collect(),
    )
}

async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionView>), ServiceError> {
    let req = body(payload)?;
    let dataset = state.registry().get(&req.dataset)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::create(id.clone(), dataset, &req)?;
    let record = LogRecord::Created {
        params: session.params().clone(),
        question: session.question().expect("new sessions have a question"),
    };
    state.inner.store.append(&id, &record, true)?;
    let view = session.view();
    state
        .inner
        .sessions
        .write()
        .expect("session map poisoned")
        .insert(id, Arc::new(Mutex::new(Ok(session))));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ServiceError> {
    let slot = state.slot(&id)?;
    let guard = slot.lock().await;
    let session = guard.as_ref().map_err(|e| ServiceError::Integrity(e.clone()))?;
    state.check_log(session)?;
    Ok(Json(session.view()))
}

async fn get_result(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionResult>, ServiceError> {
    let slot = state.slot(&id)?;
    let guard = slot.lock().await;
    let session = guard.as_ref().map_err(|e| ServiceError::Integrity(e.clone()))?;
    state.check_log(session)?;
    Ok(Json(session.result()))
}

async fn post_answer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<AnswerRequest>, JsonRejection>,
) -> Result<Json<AnswerResponse>, ServiceError> {
    let req = body(payload)?;
    let slot = state.slot(&id)?;
    let mut guard = slot.lock().await;
    let session = guard.as_mut().map_err(|e| ServiceError::Integrity(e.clone()))?;
    let Some(question) = session.question() else {
        return Err(ServiceError::SessionFinished(id));
    };
    // Work on a copy so a failed log write leaves the session untouched.
    let mut next = session.clone();
    let next_question = next.answer(req.y)?;
    let record = LogRecord::Answered {
        step: next.answered(),
        question,
        y: req.y,
        next_question,
    };
    state.inner.store.append(&id, &record, false)?;
    *session = next;
    let finished = session.status() == Status::Finished;
    let view = session.view();
    Ok(Json(AnswerResponse {
        status: view.status,
        answered: view.answered,
        question: view.question,
        result: finished.then(|| session.result()),
    }))
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> Result<(), ServiceError> {
    let state = AppState::open(&config)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
