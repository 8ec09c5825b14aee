//! Plays one game against the JSON API in-process: create a game, answer
//! truthfully about a chosen candidate until the agent guesses, then
//! reveal the target. `md3 serve` exposes the same routes over HTTP.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use http_body_util::BodyExt;
use md3::corpus::{Answer, AttributeSchema, Corpus};
use md3::engine::Agent;
use md3::policy::{PolicyConfig, PolicyMode};
use md3::service::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Value) -> Value {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .expect("request");
    let res = app.clone().oneshot(req).await.expect("response");
    let bytes = res.into_body().collect().await.expect("body").to_bytes();
    serde_json::from_slice(&bytes).expect("json body")
}

#[tokio::main]
async fn main() -> md3::Result<()> {
    let corpus = Arc::new(Corpus::generate(AttributeSchema::movie(), 300, 12)?);
    let policy = PolicyConfig {
        mode: PolicyMode::Oracle,
        ..PolicyConfig::default()
    };
    let agent = Agent::oracle(corpus.clone(), policy)?;
    let state = Arc::new(AppState::new(agent, None, 128, Duration::from_secs(600)));
    let app = router(state, None);

    let game = call(
        &app,
        Method::POST,
        "/api/games",
        json!({ "m": 16, "seed": 3 }),
    )
    .await;
    let id = game["session_id"].as_str().expect("session id").to_string();
    let target_id = game["candidates"][5]["id"]
        .as_str()
        .expect("candidate id")
        .to_string();
    let target = corpus.record(&target_id).expect("known record");
    println!(
        "playing as {} among {} candidates",
        target.title,
        game["candidates"].as_array().map_or(0, Vec::len)
    );
    println!("agent: {}", game["question"]);

    let mut attribute = game["attribute"].clone();
    loop {
        let name = attribute.as_str().expect("asked attribute");
        let j = corpus.schema.index_of(name).expect("schema attribute");
        let values = match Answer::from_record(target, j) {
            Answer::Unknown => json!("unknown"),
            Answer::Values(v) => json!(v),
        };
        println!("you:   {name} = {values}");
        let reply = call(
            &app,
            Method::POST,
            &format!("/api/games/{id}/answer"),
            json!({ "attribute": name, "values": values }),
        )
        .await;
        println!(
            "agent: {}  (entropy {:.2})",
            reply["utterance"],
            reply["entropy"].as_f64().unwrap_or(0.0)
        );
        if reply["action"] == "guess" {
            break;
        }
        attribute = reply["attribute"].clone();
    }

    let result = call(
        &app,
        Method::POST,
        &format!("/api/games/{id}/reveal"),
        json!({ "target_id": target_id }),
    )
    .await;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}
