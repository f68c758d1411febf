use std::collections::VecDeque;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::Router;
use beestar_core::protocol::Verb;
use beestar_core::value::canonical_string;
use beestar_core::{
    Cause, EdgeId, EngineError, EntitySpec, EntityView, GraphError, ProgramSpec, PropertyDecl, Value,
    WaveReport,
};
use futures_util::stream;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use tokio::sync::broadcast::error::RecvError;
use tokio::time::{interval_at, Instant};

use crate::journal::{Line, HEARTBEAT_LINE};
use crate::registry::ForwardError;
use crate::AppState;

/// An error response: `{"error": code, "detail": text}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub detail: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, detail: impl ToString) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            detail: detail.to_string(),
        }
    }

    fn bad_request(detail: impl ToString) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }
}

/// HTTP status for an error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "unknown_entity" | "unknown_property" | "unknown_edge" | "unknown_kind" | "unknown_agent"
        | "unknown_scope" => StatusCode::NOT_FOUND,
        "duplicate_name" | "duplicate_kind" | "duplicate_property" | "duplicate_edge"
        | "cycle_error" | "chain_depth_exceeded" | "kind_change_forbidden" => StatusCode::CONFLICT,
        "agent_unreachable" => StatusCode::BAD_GATEWAY,
        "io_error" => StatusCode::INTERNAL_SERVER_ERROR,
        "bad_request" => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<GraphError> for ApiError {
    fn from(e: GraphError) -> Self {
        ApiError::new(status_for(e.code()), e.code(), e)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        ApiError::new(status_for(e.code()), e.code(), e)
    }
}

impl From<ForwardError> for ApiError {
    fn from(e: ForwardError) -> Self {
        ApiError::new(StatusCode::BAD_GATEWAY, "agent_unreachable", e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        canonical(
            self.status,
            &json!({"error": self.code, "detail": self.detail}),
        )
    }
}

type ApiResult = Result<Response, ApiError>;

fn canonical<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let json = serde_json::to_value(body).expect("response bodies serialize");
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        canonical_string(&json),
    )
        .into_response()
}

fn ok<T: Serialize>(body: &T) -> ApiResult {
    Ok(canonical(StatusCode::OK, body))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(ApiError::bad_request)
}

pub fn router(state: AppState) -> Router {
    let mut router = Router::new()
        .route("/graph", get(get_graph).post(load_graph))
        .route("/entities", get(list_entities).post(create_entity))
        .route("/entities/{name}", get(show_entity).delete(delete_entity))
        .route("/entities/{name}/properties/{prop}", put(set_property))
        .route("/edges", post(add_edge))
        .route("/edges/{id}", delete(remove_edge))
        .route("/agents", get(list_agents))
        .route("/agents/{name}/message", post(message_agent))
        .route("/agents/{name}/register", post(register_agent))
        .route("/events", get(events))
        .route("/health", get(|| async { "ok" }));
    if let Some(dir) = state.config.ui_dir.clone() {
        router = router.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    router.with_state(state)
}

async fn get_graph(State(s): State<AppState>) -> ApiResult {
    ok(&s.engine.export_program())
}

async fn load_graph(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let doc: ProgramSpec = parse(&body)?;
    s.engine.load_program(&doc)?;
    ok(&json!({"entities": doc.entities.len(), "edges": doc.edges.len()}))
}

#[derive(Serialize)]
struct EntitySummary {
    name: String,
    kind: String,
    kind_chain: Vec<String>,
}

async fn list_entities(State(s): State<AppState>) -> ApiResult {
    let list: Vec<EntitySummary> = s.engine.read(|g| {
        g.entities()
            .map(|e| EntitySummary {
                name: e.name.clone(),
                kind: e.kind.clone(),
                kind_chain: g.kinds().chain(&e.kind),
            })
            .collect()
    });
    ok(&list)
}

async fn show_entity(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult {
    ok(&s.engine.entity_view(&name)?)
}

async fn create_entity(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let spec: EntitySpec = parse(&body)?;
    let decls = spec
        .properties
        .into_iter()
        .map(|(name, p)| PropertyDecl::new(name, p.ty, p.value))
        .collect();
    s.engine.create_entity(&spec.name, &spec.kind, decls)?;
    let view: EntityView = s.engine.entity_view(&spec.name)?;
    Ok(canonical(StatusCode::CREATED, &view))
}

async fn delete_entity(State(s): State<AppState>, Path(name): Path<String>) -> ApiResult {
    s.engine.remove_entity(&name)?;
    s.agents.unregister(&name);
    ok(&json!({"removed": name}))
}

#[derive(Deserialize)]
struct NewEdge {
    from: String,
    to: String,
    label: String,
}

async fn add_edge(State(s): State<AppState>, body: Bytes) -> ApiResult {
    let e: NewEdge = parse(&body)?;
    let id = s.engine.add_edge(&e.from, &e.to, &e.label)?;
    Ok(canonical(StatusCode::CREATED, &json!({"id": id.0})))
}

async fn remove_edge(State(s): State<AppState>, Path(id): Path<u64>) -> ApiResult {
    s.engine.remove_edge(EdgeId(id))?;
    ok(&json!({"removed": id}))
}

#[derive(Deserialize)]
struct SetBody {
    value: Json,
    #[serde(default)]
    cause: Option<String>,
}

/// The compact wave report returned over HTTP; full events travel on the stream.
pub fn wave_summary(r: &WaveReport) -> Json {
    json!({
        "wave": r.wave.0,
        "status": "committed",
        "chain": r.chain.0,
        "hop": r.hop,
        "events": r.events.len(),
        "notifications": r.notifications.len(),
        "triggers": r.triggers.iter().map(|t| json!({"agent": t.agent, "hop": t.hop})).collect::<Vec<_>>(),
    })
}

async fn set_property(
    State(s): State<AppState>,
    Path((name, prop)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let req: SetBody = parse(&body)?;
    let declared = s.engine.read(|g| {
        let e = g
            .entity_by_name(&name)
            .ok_or_else(|| GraphError::UnknownEntity(name.clone()))?;
        e.property(&prop)
            .map(|p| p.declared_type)
            .ok_or_else(|| GraphError::UnknownProperty {
                entity: name.clone(),
                prop: prop.clone(),
            })
    })?;
    let value = Value::from_json_typed(&req.value, declared).map_err(|source| {
        ApiError::from(GraphError::Type {
            entity: name.clone(),
            prop: prop.clone(),
            source,
        })
    })?;
    let wire = req.cause.as_deref().unwrap_or("external");
    let cause = Cause::from_wire(wire, &name)
        .ok_or_else(|| ApiError::bad_request(format!("unknown cause `{wire}`")))?;
    let report = match cause {
        Cause::AgentRun { .. } if prop == beestar_core::kind::props::OUTPUT => {
            s.engine.apply_agent_output(&name, value)?
        }
        cause => s.engine.set_property(&name, &prop, value, cause)?,
    };
    ok(&wave_summary(&report))
}

async fn list_agents(State(s): State<AppState>) -> ApiResult {
    ok(&s.agents.list())
}

#[derive(Deserialize)]
struct MessageBody {
    verb: String,
}

fn require_agent(s: &AppState, name: &str) -> Result<(), ApiError> {
    let is_agent = s.engine.read(|g| {
        g.id_of(name)
            .map(|id| g.role_of(id) == beestar_core::Role::Agent)
    });
    match is_agent {
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_agent", format!("no entity `{name}`"))),
        Some(false) => Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "not_an_agent",
            format!("`{name}` is not an agent"),
        )),
        Some(true) => Ok(()),
    }
}

async fn message_agent(
    State(s): State<AppState>,
    Path(name): Path<String>,
    body: Bytes,
) -> ApiResult {
    let req: MessageBody = parse(&body)?;
    let verb: Verb = req.verb.parse().map_err(|_| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unknown_verb",
            format!("unknown verb `{}`", req.verb),
        )
    })?;
    require_agent(&s, &name)?;
    let reply = s.agents.send(&name, verb).await?;
    ok(&reply)
}

#[derive(Deserialize)]
struct RegisterBody {
    endpoint: String,
}

async fn register_agent(
    State(s): State<AppState>,
    Path(name): Path<String>,
    body: Bytes,
) -> ApiResult {
    let req: RegisterBody = parse(&body)?;
    require_agent(&s, &name)?;
    ok(&s.agents.register(&name, &req.endpoint))
}

#[derive(Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
}

struct StreamState {
    backlog: VecDeque<Arc<Line>>,
    rx: tokio::sync::broadcast::Receiver<Arc<Line>>,
    heartbeat: tokio::time::Interval,
    last: u64,
}

async fn events(State(s): State<AppState>, Query(q): Query<EventsQuery>) -> Response {
    let (cursor, backlog, rx) = s.journal.open(q.since);
    let period = s.config.heartbeat;
    let st = StreamState {
        backlog: backlog.into(),
        rx,
        heartbeat: interval_at(Instant::now() + period, period),
        last: cursor,
    };
    let body = stream::unfold(st, |mut st| async move {
        if let Some(line) = st.backlog.pop_front() {
            st.last = line.seq;
            return Some((Ok::<_, std::io::Error>(Bytes::from(line.text.clone())), st));
        }
        loop {
            tokio::select! {
                msg = st.rx.recv() => match msg {
                    Ok(line) if line.seq <= st.last => continue,
                    Ok(line) => {
                        st.last = line.seq;
                        return Some((Ok(Bytes::from(line.text.clone())), st));
                    }
                    // A reader that fell behind the buffer is cut off; it can
                    // reconnect with its cursor.
                    Err(RecvError::Lagged(_)) | Err(RecvError::Closed) => return None,
                },
                _ = st.heartbeat.tick() => {
                    return Some((Ok(Bytes::from_static(HEARTBEAT_LINE.as_bytes())), st));
                }
            }
        }
    });
    (
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        Body::from_stream(body),
    )
        .into_response()
}
