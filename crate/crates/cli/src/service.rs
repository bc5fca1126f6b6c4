//! HTTP front end over a loaded graph snapshot.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use anyhow::{bail, Context};
use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cmdgraph_core::graph::snapshot_load;
use cmdgraph_core::intents::{classify, default_rules, load_rules};
use cmdgraph_core::recommender::{parse_executed, Components, Payload, Recommendation, DEFAULT_CACHE_CAPACITY, DEFAULT_TOP_N};
use cmdgraph_core::{CommandRequest, Engine, Graph, IntentRule, SequenceRequest, Weights};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

pub const ENV_PORT: &str = "CMDGRAPH_PORT";
pub const ENV_SNAPSHOT: &str = "CMDGRAPH_SNAPSHOT";

/// Upper bound on `n` accepted from clients.
pub const MAX_TOP_N: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub snapshot: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub top_n: usize,
    pub cache_capacity: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            snapshot: None,
            weights: None,
            rules: None,
            top_n: DEFAULT_TOP_N,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Applies `CMDGRAPH_PORT` / `CMDGRAPH_SNAPSHOT` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        if let Some(port) = lookup(ENV_PORT) {
            self.port = port.trim().parse().with_context(|| format!("{ENV_PORT}={port:?} is not a port"))?;
        }
        if let Some(path) = lookup(ENV_SNAPSHOT) {
            self.snapshot = Some(PathBuf::from(path));
        }
        Ok(())
    }

    pub fn addr(&self) -> anyhow::Result<SocketAddr> {
        format!("{}:{}", self.bind, self.port)
            .parse()
            .with_context(|| format!("bad bind address {}:{}", self.bind, self.port))
    }
}

pub struct AppState {
    config: ServiceConfig,
    weights: Weights,
    rules: Vec<IntentRule>,
    engine: OnceLock<Engine>,
    reload: Mutex<()>,
}

impl AppState {
    /// State with weights and rules loaded but no graph yet.
    pub fn new(config: ServiceConfig) -> anyhow::Result<Self> {
        if config.top_n == 0 || config.cache_capacity == 0 {
            bail!("top_n and cache_capacity must be at least 1");
        }
        let weights = match &config.weights {
            Some(p) => Weights::load(p)?,
            None => Weights::default(),
        };
        let rules = match &config.rules {
            Some(p) => load_rules(p)?,
            None => default_rules(),
        };
        Ok(Self {
            config,
            weights,
            rules,
            engine: OnceLock::new(),
            reload: Mutex::new(()),
        })
    }

    /// Loads the configured snapshot; fails when none is configured or it
    /// cannot be read.
    pub fn open(config: ServiceConfig) -> anyhow::Result<Self> {
        let Some(path) = config.snapshot.clone() else {
            bail!("no snapshot configured (use --snapshot or {ENV_SNAPSHOT})");
        };
        let graph = snapshot_load(&path).with_context(|| format!("loading snapshot {}", path.display()))?;
        let state = Self::new(config)?;
        state.install(graph)?;
        Ok(state)
    }

    pub fn with_graph(config: ServiceConfig, graph: Graph) -> anyhow::Result<Self> {
        let state = Self::new(config)?;
        state.install(graph)?;
        Ok(state)
    }

    pub fn engine(&self) -> Option<&Engine> {
        self.engine.get()
    }

    fn install(&self, graph: Graph) -> anyhow::Result<u64> {
        if let Some(e) = self.engine.get() {
            return Ok(e.swap(graph));
        }
        let engine = Engine::new(graph, self.weights, self.config.cache_capacity)?;
        let _ = self.engine.set(engine);
        Ok(self.engine.get().map_or(0, Engine::generation))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/recommend/command", post(recommend_command))
        .route("/v1/recommend/sequence", post(recommend_sequence))
        .route("/v1/admin/reload", post(reload))
        .route("/v1/health", get(health))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .with_state(state)
}

pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let addr = config.addr()?;
    let state = Arc::new(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("binding {addr}"))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = json!({ "error": { "code": code, "message": message.into() } });
    (status, Json(body)).into_response()
}

fn no_snapshot() -> Response {
    error(StatusCode::SERVICE_UNAVAILABLE, "no_snapshot", "no graph snapshot is loaded")
}

fn bad_body(rej: JsonRejection) -> Response {
    error(StatusCode::BAD_REQUEST, "bad_request", rej.body_text())
}

fn from_core(e: cmdgraph_core::Error) -> Response {
    match e {
        cmdgraph_core::Error::InvalidArgument(m) => error(StatusCode::BAD_REQUEST, "bad_request", m),
        other => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
    }
}

fn top_n(requested: Option<usize>, default: usize) -> Result<usize, String> {
    match requested {
        None => Ok(default),
        Some(n) if (1..=MAX_TOP_N).contains(&n) => Ok(n),
        Some(n) => Err(format!("n must be between 1 and {MAX_TOP_N}, got {n}")),
    }
}

/// Runs a recommendation off the async workers; a panic becomes a 500.
async fn run<F>(f: F) -> Result<Recommendation, Response>
where
    F: FnOnce() -> cmdgraph_core::Result<Recommendation> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(r)) => Ok(r),
        Ok(Err(e)) => Err(from_core(e)),
        Err(_) => Err(error(StatusCode::INTERNAL_SERVER_ERROR, "internal", "recommendation failed")),
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

#[derive(Debug, Deserialize)]
pub struct CommandBody {
    pub partial: String,
    pub user: String,
    pub ip: String,
    pub scope: String,
    pub n: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandCandidate {
    pub command: String,
    pub score: f64,
    pub components: Components,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CommandResponse {
    pub candidates: Vec<CommandCandidate>,
    pub cached: bool,
    pub elapsed_ms: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unknown_scope: bool,
}

async fn recommend_command(State(st): State<Arc<AppState>>, body: Result<Json<CommandBody>, JsonRejection>) -> Response {
    let start = Instant::now();
    let Json(body) = match body {
        Ok(b) => b,
        Err(rej) => return bad_body(rej),
    };
    let top_n = match top_n(body.n, st.config.top_n) {
        Ok(n) => n,
        Err(msg) => return error(StatusCode::BAD_REQUEST, "bad_request", msg),
    };
    let Some(engine) = st.engine() else {
        return no_snapshot();
    };
    if !engine.has_scope(&body.scope) {
        let resp = CommandResponse {
            candidates: Vec::new(),
            cached: false,
            elapsed_ms: elapsed_ms(start),
            unknown_scope: true,
        };
        return (StatusCode::NOT_FOUND, Json(resp)).into_response();
    }
    let req = CommandRequest {
        partial: body.partial,
        user: body.user,
        ip: body.ip,
        scope: body.scope,
        top_n,
    };
    let worker = st.clone();
    let rec = match run(move || worker.engine().expect("engine installed").recommend_commands(&req)).await {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let candidates = rec
        .candidates
        .into_iter()
        .filter_map(|c| match c.payload {
            Payload::Command(command) => Some(CommandCandidate {
                command,
                score: c.score,
                components: c.components,
            }),
            Payload::Sequence(_) => None,
        })
        .collect();
    Json(CommandResponse {
        candidates,
        cached: rec.cached,
        elapsed_ms: elapsed_ms(start),
        unknown_scope: false,
    })
    .into_response()
}

#[derive(Debug, Deserialize)]
pub struct SequenceBody {
    pub command: String,
    pub user: String,
    pub ip: String,
    pub scope: String,
    pub n: Option<usize>,
    pub cwd: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SequenceCandidate {
    pub suffix: Vec<String>,
    pub score: f64,
    pub components: Components,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SequenceResponse {
    pub candidates: Vec<SequenceCandidate>,
    pub cached: bool,
    pub elapsed_ms: f64,
    /// Intent of the executed command, when a rule matches it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unknown_scope: bool,
}

async fn recommend_sequence(
    State(st): State<Arc<AppState>>,
    body: Result<Json<SequenceBody>, JsonRejection>,
) -> Response {
    let start = Instant::now();
    let Json(body) = match body {
        Ok(b) => b,
        Err(rej) => return bad_body(rej),
    };
    let top_n = match top_n(body.n, st.config.top_n) {
        Ok(n) => n,
        Err(msg) => return error(StatusCode::BAD_REQUEST, "bad_request", msg),
    };
    let Some(engine) = st.engine() else {
        return no_snapshot();
    };
    if !engine.has_scope(&body.scope) {
        let resp = SequenceResponse {
            candidates: Vec::new(),
            cached: false,
            elapsed_ms: elapsed_ms(start),
            intent: None,
            unknown_scope: true,
        };
        return (StatusCode::NOT_FOUND, Json(resp)).into_response();
    }
    let executed = parse_executed(&body.command, body.cwd.as_deref(), &body.user);
    let intent = classify(&executed, &st.rules).label().map(|l| l.render());
    let req = SequenceRequest {
        command: body.command,
        user: body.user,
        ip: body.ip,
        scope: body.scope,
        top_n,
        cwd: body.cwd,
    };
    let worker = st.clone();
    let rec = match run(move || worker.engine().expect("engine installed").recommend_sequences(&req)).await {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let candidates = rec
        .candidates
        .into_iter()
        .filter_map(|c| match c.payload {
            Payload::Sequence(suffix) => Some(SequenceCandidate {
                suffix,
                score: c.score,
                components: c.components,
            }),
            Payload::Command(_) => None,
        })
        .collect();
    Json(SequenceResponse {
        candidates,
        cached: rec.cached,
        elapsed_ms: elapsed_ms(start),
        intent,
        unknown_scope: false,
    })
    .into_response()
}

fn graph_summary(engine: &Engine) -> serde_json::Value {
    let g = engine.graph();
    json!({
        "generation": engine.generation(),
        "vertices": g.vertices().len(),
        "edges": g.edges().len(),
        "scopes": g.scopes(),
        "meta": g.meta(),
    })
}

async fn reload(State(st): State<Arc<AppState>>) -> Response {
    let _guard = st.reload.lock().await;
    let Some(path) = st.config.snapshot.clone() else {
        return error(StatusCode::CONFLICT, "no_snapshot_path", "no snapshot path configured");
    };
    let loaded = tokio::task::spawn_blocking(move || snapshot_load(&path)).await;
    let graph = match loaded {
        Ok(Ok(g)) => g,
        Ok(Err(e)) => return error(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", e.to_string()),
        Err(_) => return error(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", "snapshot loader panicked"),
    };
    if let Err(e) = st.install(graph) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, "reload_failed", e.to_string());
    }
    let engine = st.engine().expect("engine installed");
    tracing::info!("reloaded snapshot, generation {}", engine.generation());
    Json(graph_summary(engine)).into_response()
}

async fn health(State(st): State<Arc<AppState>>) -> Response {
    match st.engine() {
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "no_snapshot" })),
        )
            .into_response(),
        Some(engine) => {
            let mut body = graph_summary(engine);
            body["status"] = json!("ok");
            body["queries"] = json!(engine.graph().query_count());
            Json(body).into_response()
        }
    }
}
