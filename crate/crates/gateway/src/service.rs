//! HTTP session service.
//!
//! Each session lives on its own thread and is only touched there; handlers
//! send it commands and read a shared snapshot. Interrupts skip the command
//! queue and go straight into the session's interrupt queue, so they are
//! picked up at the next step boundary even while a run is in progress.

use std::collections::HashMap;
use std::convert::Infallible;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{mpsc, Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use tokio::sync::broadcast::error::RecvError;
use interplan::guidelines::TaskFamily;
use interplan::llm::{OracleProvider, Provider, RemoteProvider};
use interplan::orchestrator::{InterruptQueue, Session, SessionError, SessionView};
use interplan::pack::TaskPack;
use interplan::transcript::{SessionEvent, SessionState, TranscriptRecord};
use interplan::vision::SceneDescription;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{broadcast, oneshot};

use crate::config::{ProviderKind, ServiceConfig};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("unknown session {0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({"error": self.to_string()}))).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::Conflict(e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

/// What handlers may read without going through the session thread.
struct Shared {
    view: SessionView,
    scene: SceneDescription,
    history: Vec<TranscriptRecord>,
    events: broadcast::Sender<TranscriptRecord>,
}

type Reply = oneshot::Sender<Result<SessionView, SessionError>>;

enum Command {
    Request(String, Reply),
    Advance(Reply),
    Run(Reply),
}

struct SessionHandle {
    commands: mpsc::Sender<Command>,
    shared: Arc<Mutex<Shared>>,
    interrupts: InterruptQueue,
}

fn publish(shared: &Mutex<Shared>, session: &Session) {
    let mut s = shared.lock().expect("session snapshot");
    s.view = session.view();
    s.scene = session.scene();
}

fn spawn_session(mut session: Session, shared: Arc<Mutex<Shared>>) -> mpsc::Sender<Command> {
    let (tx, rx) = mpsc::channel::<Command>();
    std::thread::Builder::new()
        .name(format!("session-{}", session.id()))
        .spawn(move || {
            for command in rx {
                let (result, reply) = match command {
                    Command::Request(text, reply) => (session.submit_request(&text), reply),
                    Command::Advance(reply) => (session.advance(), reply),
                    Command::Run(reply) => {
                        let mut result = Ok(session.state());
                        while !session.state().is_terminal() {
                            result = session.advance();
                            publish(&shared, &session);
                            if result.is_err() {
                                break;
                            }
                        }
                        (result, reply)
                    }
                };
                publish(&shared, &session);
                let _ = reply.send(result.map(|_| session.view()));
            }
        })
        .expect("spawn session thread");
    tx
}

pub struct AppState {
    config: ServiceConfig,
    remote: Option<Arc<dyn Provider>>,
    sessions: RwLock<HashMap<String, SessionHandle>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> anyhow::Result<Self> {
        let remote: Option<Arc<dyn Provider>> = match config.provider.kind {
            ProviderKind::Oracle => None,
            ProviderKind::Remote => Some(Arc::new(RemoteProvider::new(config.provider.remote_config()?)?)),
        };
        Ok(AppState {
            config,
            remote,
            sessions: RwLock::new(HashMap::new()),
        })
    }

    fn provider_for(&self, pack: &TaskPack) -> Arc<dyn Provider> {
        match &self.remote {
            Some(p) => p.clone(),
            None => Arc::new(OracleProvider::new(pack.lexicon.clone())),
        }
    }

    fn with_handle<T>(&self, id: &str, f: impl FnOnce(&SessionHandle) -> T) -> Result<T, ApiError> {
        let sessions = self.sessions.read().expect("session table");
        sessions
            .get(id)
            .map(f)
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/request", post(submit_request))
        .route("/sessions/{id}/interrupt", post(interrupt))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/run", post(run))
        .route("/sessions/{id}/state", get(state_view))
        .route("/sessions/{id}/scene", get(scene))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub domain: TaskFamily,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TextBody {
    pub text: String,
}

fn transcript_sink(path: PathBuf, shared: Arc<Mutex<Shared>>) -> std::io::Result<impl FnMut(&TranscriptRecord) + Send> {
    let mut file = File::options().create(true).append(true).open(&path)?;
    Ok(move |record: &TranscriptRecord| {
        if let Ok(line) = serde_json::to_string(record) {
            if let Err(e) = writeln!(file, "{line}").and_then(|_| file.flush()) {
                tracing::warn!("transcript {}: {e}", path.display());
            }
        }
        let mut s = shared.lock().expect("session snapshot");
        s.history.push(record.clone());
        let _ = s.events.send(record.clone());
    })
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<(StatusCode, Json<Created>), ApiError> {
    let Json(body) = body?;
    let pack = app
        .config
        .packs
        .get(&body.domain)
        .cloned()
        .ok_or_else(|| ApiError::BadRequest(format!("domain {} is not configured", body.domain)))?;
    let id = uuid::Uuid::new_v4().to_string();
    let provider = app.provider_for(&pack);
    let session = Session::new(id.clone(), pack, provider, body.seed);
    let (events, _) = broadcast::channel(1024);
    let shared = Arc::new(Mutex::new(Shared {
        view: session.view(),
        scene: session.scene(),
        history: Vec::new(),
        events,
    }));
    let path = app.config.transcript_dir.join(format!("{id}.jsonl"));
    let sink = transcript_sink(path, shared.clone()).map_err(|e| ApiError::Internal(e.to_string()))?;
    let session = session.with_sink(sink);
    let interrupts = session.interrupt_queue();
    let commands = spawn_session(session, shared.clone());
    app.sessions.write().expect("session table").insert(
        id.clone(),
        SessionHandle {
            commands,
            shared,
            interrupts,
        },
    );
    tracing::info!(session = %id, domain = %body.domain, "session created");
    Ok((StatusCode::CREATED, Json(Created { session_id: id })))
}

async fn send(app: &AppState, id: &str, make: impl FnOnce(Reply) -> Command) -> Result<Json<SessionView>, ApiError> {
    let (tx, rx) = oneshot::channel();
    app.with_handle(id, |h| h.commands.send(make(tx)))?
        .map_err(|_| ApiError::Internal("session thread has stopped".into()))?;
    let view = rx
        .await
        .map_err(|_| ApiError::Internal("session thread has stopped".into()))??;
    Ok(Json(view))
}

async fn submit_request(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<TextBody>, JsonRejection>,
) -> Result<Json<SessionView>, ApiError> {
    app.with_handle(&id, |_| ())?;
    let Json(body) = body?;
    send(&app, &id, |r| Command::Request(body.text, r)).await
}

async fn interrupt(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<TextBody>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (state, queue) = app.with_handle(&id, |h| {
        (h.shared.lock().expect("session snapshot").view.state, h.interrupts.clone())
    })?;
    let Json(body) = body?;
    if state.is_terminal() {
        return Err(SessionError::SessionTerminal.into());
    }
    if state == SessionState::Idle {
        return Err(ApiError::Conflict("no request has been submitted yet".into()));
    }
    queue.push(body.text);
    Ok(Json(json!({"accepted": true, "pending": queue.len()})))
}

async fn advance(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    send(&app, &id, Command::Advance).await
}

async fn run(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    send(&app, &id, Command::Run).await
}

async fn state_view(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    app.with_handle(&id, |h| Json(h.shared.lock().expect("session snapshot").view.clone()))
}

async fn scene(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<SceneDescription>, ApiError> {
    app.with_handle(&id, |h| Json(h.shared.lock().expect("session snapshot").scene.clone()))
}

fn is_terminal_event(record: &TranscriptRecord) -> bool {
    matches!(
        record.event,
        SessionEvent::Completed | SessionEvent::Failed { .. } | SessionEvent::Refused { .. }
    )
}

fn sse_event(record: &TranscriptRecord) -> Result<Event, Infallible> {
    Ok(Event::default()
        .event(record.event.event_type())
        .data(serde_json::to_string(record).unwrap_or_default()))
}

/// Past records first, then live ones; the stream ends after the record
/// that made the session terminal.
async fn events(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let (past, live) = app.with_handle(&id, |h| {
        let s = h.shared.lock().expect("session snapshot");
        (s.history.clone(), s.events.subscribe())
    })?;
    let finished = past.iter().any(is_terminal_event);
    let replayed = stream::iter(past.into_iter().map(|r| sse_event(&r)));
    let live = stream::unfold((live, finished), |(mut rx, done)| async move {
        if done {
            return None;
        }
        loop {
            match rx.recv().await {
                Ok(record) => {
                    let done = is_terminal_event(&record);
                    return Some((sse_event(&record), (rx, done)));
                }
                Err(RecvError::Lagged(n)) => tracing::warn!("event stream lagged by {n} records"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Ok(Sse::new(replayed.chain(live)).keep_alive(KeepAlive::default()))
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let listen = config.listen;
    let app = Arc::new(AppState::new(config)?);
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
