use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::corpus::Split;
use crate::engine::{Episode, HumanAnswer, NluMode};
use crate::error::Md3Error;
use crate::policy::{Action, PolicyMode};

use super::session::{input_kind, GameSession, Status};
use super::AppState;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            message: message.into(),
        }
    }
}

impl From<Md3Error> for ApiError {
    fn from(e: Md3Error) -> Self {
        let (status, code) = match &e {
            Md3Error::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Md3Error::Conflict(_) => (StatusCode::CONFLICT, "conflict"),
            Md3Error::InvalidConfig(_) | Md3Error::Contract(_) | Md3Error::Schema(_) => {
                (StatusCode::BAD_REQUEST, "bad_request")
            }
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": { "code": self.code, "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateCard {
    pub id: String,
    pub title: String,
    #[serde(rename = "shortDoc")]
    pub short_doc: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefEntry {
    pub id: String,
    pub title: String,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub action: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    pub belief_top: Vec<BeliefEntry>,
    pub entropy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub m: usize,
    #[serde(default)]
    pub mode: Option<PolicyMode>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub candidates: Vec<CandidateCard>,
    pub question: String,
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    pub nlu_mode: NluMode,
    /// `text` for free answers, `structured` when values must be picked.
    pub input: String,
    pub belief_top: Vec<BeliefEntry>,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnswerResponse {
    pub action: String,
    pub utterance: String,
    pub turn: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<BeliefEntry>,
    pub belief_top: Vec<BeliefEntry>,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevealRequest {
    pub target_id: String,
    #[serde(default)]
    pub correct: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RevealResponse {
    pub rank: usize,
    /// Reward for the final guess.
    pub reward: f64,
    /// Guess reward plus the per-question penalties.
    #[serde(rename = "return")]
    pub total_return: f64,
    pub turns: usize,
    pub guess: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameView {
    pub session_id: String,
    pub status: Status,
    pub nlu_mode: NluMode,
    pub input: String,
    pub candidates: Vec<CandidateCard>,
    pub turns: Vec<TurnView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<RevealResponse>,
    pub created: u64,
}

fn sweep(state: &AppState) {
    let mut sessions = state.sessions.lock().expect("session table");
    sessions.retain(|_, s| match s.try_lock() {
        Ok(mut g) => {
            if g.updated.elapsed() <= state.idle {
                return true;
            }
            g.status = Status::Expired;
            let _ = g.record(&serde_json::json!({ "event": "expire" }));
            false
        }
        Err(_) => true,
    });
}

fn lookup(state: &AppState, id: &str) -> Result<Arc<tokio::sync::Mutex<GameSession>>, ApiError> {
    sweep(state);
    let sessions = state.sessions.lock().expect("session table");
    sessions
        .get(id)
        .cloned()
        .ok_or_else(|| Md3Error::NotFound(format!("game `{id}`")).into())
}

pub async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let n = state.sessions.lock().expect("session table").len();
    Json(serde_json::json!({
        "status": "ok",
        "nlu_mode": state.agent.nlu,
        "policy": state.agent.policy.mode,
        "sessions": n,
    }))
}

pub async fn create_game(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<CreateResponse> {
    let Json(req) = body?;
    sweep(&state);
    let pool = state.agent.corpus.split_indices(Split::Dialogue);
    let max_m = state.max_m.min(pool.len());
    if req.m < 2 || req.m > max_m {
        return Err(ApiError::bad_request(format!(
            "m must be between 2 and {max_m}"
        )));
    }
    let agent = match req.mode {
        Some(mode) if mode != state.agent.policy.mode => {
            let mut policy = state.agent.policy.clone();
            policy.mode = mode;
            Arc::new(state.agent.with_policy(policy)?)
        }
        _ => state.agent.clone(),
    };
    let seed = req.seed.unwrap_or_else(rand::random);
    let candidates = Episode::sample(&pool, req.m, seed)?.candidates;
    let id = uuid::Uuid::new_v4().to_string();
    let (session, reply) = GameSession::start(
        id.clone(),
        agent,
        candidates,
        seed,
        state.transcripts.clone(),
    )?;
    let turn = session.turns.last().expect("first turn").clone();
    let response = CreateResponse {
        session_id: id.clone(),
        candidates: session.cards(),
        question: reply.utterance,
        action: turn.action,
        attribute: turn.attribute,
        options: turn.options,
        nlu_mode: session.agent.nlu,
        input: input_kind(session.agent.nlu).into(),
        belief_top: turn.belief_top,
        entropy: turn.entropy,
    };
    state
        .sessions
        .lock()
        .expect("session table")
        .insert(id, Arc::new(tokio::sync::Mutex::new(session)));
    Ok(Json(response))
}

fn busy() -> ApiError {
    Md3Error::Conflict("another request for this game is in progress".into()).into()
}

pub async fn submit_answer(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<HumanAnswer>, JsonRejection>,
) -> ApiResult<AnswerResponse> {
    let Json(input) = body?;
    let session = lookup(&state, &id)?;
    let mut s = session.try_lock().map_err(|_| busy())?;
    let reply = s.answer(&input)?;
    let turn = s.turns.last().expect("turn").clone();
    let guess = match reply.action {
        Action::Guess(i) => Some(BeliefEntry {
            id: s.game.ids[i].clone(),
            title: s.agent.corpus.records[s.game.candidates[i]].title.clone(),
            prob: s.game.state.p[i],
        }),
        Action::Ask(_) => None,
    };
    Ok(Json(AnswerResponse {
        action: turn.action,
        utterance: reply.utterance,
        turn: s.game.asked.len(),
        attribute: turn.attribute,
        options: turn.options,
        guess,
        belief_top: turn.belief_top,
        entropy: turn.entropy,
    }))
}

pub async fn reveal(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<RevealRequest>, JsonRejection>,
) -> ApiResult<RevealResponse> {
    let Json(req) = body?;
    let session = lookup(&state, &id)?;
    let mut s = session.try_lock().map_err(|_| busy())?;
    if let (Some(correct), Some(g)) = (req.correct, s.game.guess()) {
        if s.result.is_none() && correct != (s.game.ids[g] == req.target_id) {
            return Err(ApiError::bad_request(
                "`correct` contradicts the revealed target",
            ));
        }
    }
    Ok(Json(s.reveal(&req.target_id)?))
}

pub async fn get_game(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<GameView> {
    let session = lookup(&state, &id)?;
    let s = session.try_lock().map_err(|_| busy())?;
    Ok(Json(s.view()))
}
