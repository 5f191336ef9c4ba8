//! HTTP/JSON facade for the investigator loop: load or simulate records,
//! cluster with prior knowledge, rank, inspect the diagram, revise, repeat.
//!
//! Sessions live in memory; `GET /sessions/{id}/export` and
//! `POST /sessions/import` move them in and out as JSON.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use latentnode::cluster::{self, CooccurrenceIndex, KMedoidsOptions};
use latentnode::diagram::{build_diagram, DiagramModel};
use latentnode::rank::{rank_records, RankingFunction, RankingOutcome};
use latentnode::simulate::{generate_records, occlude};
use latentnode::{Clustering, Error, PersonId, RecordSet, SimulationConfig, SocialNetwork};

const BUILTIN: &str = "builtin:911";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub timestamp_ms: u64,
    pub action: String,
    pub config: Value,
}

/// Ground truth kept when a session was created by simulation with a target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Occlusion {
    pub target: PersonId,
    pub altered: Vec<bool>,
    pub emptied: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub network: String,
    pub records: RecordSet,
    pub occlusion: Option<Occlusion>,
    pub clustering: Option<Clustering>,
    pub outcome: Option<RankingOutcome>,
    pub diagram: Option<DiagramModel>,
    pub history: Vec<HistoryEntry>,
}

impl Session {
    fn record(&mut self, action: &str, config: Value) {
        let seq = self.history.last().map_or(1, |h| h.seq + 1);
        let timestamp_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        self.history.push(HistoryEntry {
            seq,
            timestamp_ms,
            action: action.to_owned(),
            config,
        });
    }

    fn reset_derived(&mut self) {
        self.clustering = None;
        self.outcome = None;
        self.diagram = None;
    }
}

#[derive(Default)]
pub struct AppState {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
    assets: Option<PathBuf>,
}

impl AppState {
    pub fn new(assets: Option<PathBuf>) -> Self {
        AppState {
            assets,
            ..Default::default()
        }
    }

    fn insert(&self, mut session: Session) -> String {
        let n = self.next_id.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s{n:06}");
        session.id = id.clone();
        self.sessions
            .write()
            .expect("session table poisoned")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        id
    }

    fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("session table poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
            field: Some(field.to_owned()),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let field = match &e {
            Error::InvalidParameter { name, .. } => Some((*name).to_owned()),
            Error::UnknownPerson(_) | Error::TargetAbsent { .. } => Some("person".to_owned()),
            Error::Parse { .. } => Some("body".to_owned()),
            _ => None,
        };
        ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: e.to_string(),
            field,
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::invalid("body", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.message, "field": self.field }));
        (self.status, body).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn lock(session: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|p| p.into_inner())
}

#[derive(Debug, Deserialize, Serialize)]
pub struct SimulateRequest {
    pub t: f64,
    pub baskets: usize,
    pub seed: u64,
    pub target: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
pub struct CreateSession {
    #[serde(default = "default_network")]
    pub network: String,
    /// Edge-list text, required when `network` is `upload`.
    pub edge_list: Option<String>,
    pub simulate: Option<SimulateRequest>,
}

fn default_network() -> String {
    BUILTIN.to_owned()
}

fn load_network(req: &CreateSession) -> Result<SocialNetwork, ApiError> {
    match req.network.as_str() {
        BUILTIN => Ok(SocialNetwork::builtin_911()),
        "upload" => {
            let text = req.edge_list.as_deref().ok_or_else(|| {
                ApiError::invalid("edge_list", "required when network is `upload`")
            })?;
            SocialNetwork::load_edge_list(text)
                .map_err(|e| ApiError::invalid("edge_list", e.to_string()))
        }
        other => Err(ApiError::invalid(
            "network",
            format!("`{other}` is neither `{BUILTIN}` nor `upload`"),
        )),
    }
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<Value> {
    let Json(req) = body?;
    let net = load_network(&req)?;
    let mut session = Session {
        id: String::new(),
        network: req.network.clone(),
        records: RecordSet::default(),
        occlusion: None,
        clustering: None,
        outcome: None,
        diagram: None,
        history: Vec::new(),
    };
    if let Some(sim) = &req.simulate {
        let cfg = SimulationConfig {
            t: sim.t,
            basket_count: sim.baskets,
            rng_seed: sim.seed,
        };
        let records = generate_records(&net, &cfg).map_err(|e| match e {
            Error::InvalidParameter {
                name: "basket_count",
                message,
            } => ApiError::invalid("baskets", message),
            other => other.into(),
        })?;
        match &sim.target {
            Some(target) => {
                let target = PersonId::new(target.as_str())?;
                if !net.contains(&target) {
                    return Err(ApiError::invalid(
                        "target",
                        format!("`{target}` is not in the network"),
                    ));
                }
                let o = occlude(&records, &target)
                    .map_err(|e| ApiError::invalid("target", e.to_string()))?;
                session.records = o.occluded;
                session.occlusion = Some(Occlusion {
                    target,
                    altered: o.altered,
                    emptied: o.emptied.len(),
                });
            }
            None => session.records = records,
        }
    }
    session.record("create", serde_json::to_value(&req).unwrap_or(Value::Null));
    let summary = json!({
        "baskets": session.records.len(),
        "persons": session.records.persons().len(),
        "target": session.occlusion.as_ref().map(|o| o.target.clone()),
    });
    let id = state.insert(session);
    Ok(Json(json!({ "session_id": id, "summary": summary })))
}

async fn replace_records(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: String,
) -> ApiResult<Value> {
    let records = RecordSet::parse(&body).map_err(|e| ApiError::invalid("body", e.to_string()))?;
    let session = state.get(&id)?;
    let mut s = lock(&session);
    s.records = records;
    s.occlusion = None;
    s.reset_derived();
    let summary = json!({ "baskets": s.records.len(), "persons": s.records.persons().len() });
    s.record("records", summary.clone());
    Ok(Json(summary))
}

#[derive(Debug, Deserialize, Serialize)]
pub struct ClusterRequest {
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub medoids: Vec<String>,
    pub restarts: Option<usize>,
}

fn clustering_summary(idx: &CooccurrenceIndex, c: &Clustering) -> Result<Value, ApiError> {
    let objectives = (0..c.k)
        .map(|j| cluster::medoid_objective(idx, c, j))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({
        "k": c.k,
        "medoids": c.medoids,
        "clusters": c.clusters(),
        "cluster_objectives": objectives,
        "objective": objectives.iter().sum::<f64>(),
    }))
}

async fn cluster_records(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<ClusterRequest>, JsonRejection>,
) -> ApiResult<Value> {
    let session = state.get(&id)?;
    let Json(req) = body?;
    let mut s = lock(&session);
    if s.records.is_empty() {
        return Err(ApiError::conflict("session has no records"));
    }
    let medoids = req
        .medoids
        .iter()
        .map(|m| PersonId::new(m.as_str()).map_err(|e| ApiError::invalid("medoids", e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let idx = CooccurrenceIndex::new(&s.records);
    let opts = KMedoidsOptions {
        restarts: req.restarts.unwrap_or(KMedoidsOptions::default().restarts),
        ..Default::default()
    };
    let clustering =
        cluster::k_medoids_with(&idx, req.k, req.seed, &medoids, &opts).map_err(|e| match e {
            Error::UnknownPerson(p) => {
                ApiError::invalid("medoids", format!("unknown person `{p}`"))
            }
            other => other.into(),
        })?;
    let summary = clustering_summary(&idx, &clustering)?;
    s.reset_derived();
    s.clustering = Some(clustering);
    s.record("cluster", serde_json::to_value(&req).unwrap_or(Value::Null));
    Ok(Json(summary))
}

#[derive(Debug, Deserialize, Serialize)]
pub struct RankRequest {
    #[serde(rename = "fn")]
    pub function: RankingFunction,
}

async fn rank(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<RankRequest>, JsonRejection>,
) -> ApiResult<Value> {
    let session = state.get(&id)?;
    let Json(req) = body?;
    let mut s = lock(&session);
    let clustering = s
        .clustering
        .as_ref()
        .ok_or_else(|| ApiError::conflict("cluster the records before ranking"))?;
    let outcome = rank_records(&s.records, clustering, req.function)?;
    let ranked: Vec<Value> = outcome
        .order
        .iter()
        .enumerate()
        .map(|(pos, &b)| {
            let mut row = json!({
                "rank": pos + 1,
                "basket": b,
                "score": outcome.scores[b],
                "members": s.records[b].members(),
                "gateways": outcome.gateways[b],
            });
            if let Some(o) = &s.occlusion {
                row["altered"] = json!(o.altered[b]);
            }
            row
        })
        .collect();
    let body = json!({ "function": req.function, "ranked": ranked });
    s.diagram = None;
    s.outcome = Some(outcome);
    s.record("rank", serde_json::to_value(&req).unwrap_or(Value::Null));
    Ok(Json(body))
}

#[derive(Debug, Deserialize, Serialize)]
pub struct DiagramQuery {
    pub mret: usize,
    #[serde(default)]
    pub threshold: f64,
}

async fn diagram(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<DiagramQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<DiagramModel> {
    let session = state.get(&id)?;
    let Query(q) = query.map_err(|e| ApiError::invalid("query", e.body_text()))?;
    let mut s = lock(&session);
    let (clustering, outcome) = match (&s.clustering, &s.outcome) {
        (Some(c), Some(o)) => (c, o),
        _ => {
            return Err(ApiError::conflict(
                "cluster and rank before requesting a diagram",
            ))
        }
    };
    let model = build_diagram(&s.records, clustering, outcome, q.mret, q.threshold)?;
    s.diagram = Some(model.clone());
    s.record("diagram", serde_json::to_value(&q).unwrap_or(Value::Null));
    Ok(Json(model))
}

async fn history(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Vec<HistoryEntry>> {
    let session = state.get(&id)?;
    let s = lock(&session);
    Ok(Json(s.history.clone()))
}

async fn export_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Session> {
    let session = state.get(&id)?;
    let s = lock(&session);
    Ok(Json(s.clone()))
}

async fn import_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<Session>, JsonRejection>,
) -> ApiResult<Value> {
    let Json(mut session) = body?;
    session.record("import", json!({ "from": session.id }));
    let id = state.insert(session);
    Ok(Json(json!({ "session_id": id })))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn placeholder_app() -> Html<&'static str> {
    Html(
        "<!doctype html><title>latentnode</title>\
         <p>No workbench assets configured. Start the server with <code>--assets DIR</code>.</p>",
    )
}

pub fn router(state: Arc<AppState>) -> Router {
    let app = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}/records", post(replace_records))
        .route("/sessions/{id}/cluster", post(cluster_records))
        .route("/sessions/{id}/rank", post(rank))
        .route("/sessions/{id}/diagram", get(diagram))
        .route("/sessions/{id}/history", get(history))
        .route("/sessions/{id}/export", get(export_session));
    let app = match &state.assets {
        Some(dir) => app.nest_service("/app", ServeDir::new(dir)),
        None => app.route("/app/", get(placeholder_app)),
    };
    app.with_state(state)
}

/// Serves the API until the process is stopped.
pub async fn serve(addr: SocketAddr, assets: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(assets)))).await
}
