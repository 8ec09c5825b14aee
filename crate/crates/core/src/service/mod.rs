//! HTTP game service: a person keeps a movie secret and answers the
//! agent's questions through a JSON API.

mod api;
mod session;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::routing::{get, post};
use axum::Router;
use log::info;
use tower_http::services::ServeDir;

pub use api::{
    AnswerResponse, ApiError, BeliefEntry, CandidateCard, CreateRequest, CreateResponse, GameView,
    RevealRequest, RevealResponse, TurnView,
};
pub use session::{GameSession, Status};

use crate::cli::{load_agent, RunConfig};
use crate::engine::Agent;
use crate::error::{Md3Error, Result};

/// Shared server state. The agent is read-only; each session has its own
/// lock, taken without waiting so a second concurrent request is refused.
pub struct AppState {
    pub agent: Arc<Agent>,
    pub sessions: Mutex<HashMap<String, Arc<tokio::sync::Mutex<GameSession>>>>,
    pub transcripts: Option<PathBuf>,
    pub max_m: usize,
    pub idle: Duration,
}

impl AppState {
    pub fn new(agent: Agent, transcripts: Option<PathBuf>, max_m: usize, idle: Duration) -> Self {
        AppState {
            agent: Arc::new(agent),
            sessions: Mutex::new(HashMap::new()),
            transcripts,
            max_m,
            idle,
        }
    }
}

pub fn router(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/health", get(api::health))
        .route("/api/games", post(api::create_game))
        .route("/api/games/{id}", get(api::get_game))
        .route("/api/games/{id}/answer", post(api::submit_answer))
        .route("/api/games/{id}/reveal", post(api::reveal))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Loads the configured agent and serves until interrupted.
pub fn serve(config: RunConfig) -> Result<()> {
    let agent = load_agent(&config)?;
    let transcripts = config.data_dir().join("sessions");
    std::fs::create_dir_all(&transcripts)?;
    let state = Arc::new(AppState::new(
        agent,
        Some(transcripts),
        config.serve.max_m,
        Duration::from_secs(config.serve.idle_minutes * 60),
    ));
    let app = router(state, config.serve.static_dir.clone());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.serve.addr).await?;
        info!("listening on {}", config.serve.addr);
        axum::serve(listener, app)
            .await
            .map_err(|e| Md3Error::Io(std::io::Error::other(e)))
    })
}
