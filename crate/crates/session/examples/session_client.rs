//! Starts the session service in-process and plays two sessions over HTTP:
//! a scripted planning user against the mixture learner, and a scripted
//! literal user against the naive learner.
//!
//! Usage: `cargo run --release -p seqteach-session --example session_client -- [target]`

use std::net::SocketAddr;

use serde_json::{json, Value};

use seqteach::rng::stream;
use seqteach_session::agents::Agent;
use seqteach_session::session::SessionView;
use seqteach_session::{router, AppState, ServiceConfig, ServiceError};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let target: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let dir = tempfile::tempdir()?;
    let state = AppState::open(&ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        registry: None,
    })?;
    let ds = state.registry().iter().next().ok_or(ServiceError::Config("no dataset".into()))?.clone();
    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });

    let client = reqwest::Client::new();
    for (model, agent) in [("mixture", Agent::Planner), ("naive", Agent::Naive)] {
        let created: Value = client
            .post(format!("{base}/sessions"))
            .json(&json!({"dataset": ds.id, "model": model, "target": target, "seed": 1}))
            .send()
            .await?
            .json()
            .await?;
        let id = created["id"].as_str().unwrap_or_default().to_string();
        println!("\n{model} learner, {agent:?} user, target {}", created["target"]["word"]);
        let mut rng = stream(9, &[]);
        loop {
            let view: SessionView = client.get(format!("{base}/sessions/{id}")).send().await?.json().await?;
            let Some(q) = &view.question else { break };
            let y = agent.respond(&ds, &view, &mut rng)?;
            println!(
                "  {:>2}. {:<12} {}  (relevance {:.2})",
                view.answered + 1,
                q.word,
                if y == 1 { "yes" } else { "no" },
                ds.reward(target, q.index)
            );
            client
                .post(format!("{base}/sessions/{id}/answers"))
                .json(&json!({ "y": y }))
                .send()
                .await?
                .error_for_status()?;
        }
        let result: Value = client.get(format!("{base}/sessions/{id}/result")).send().await?.json().await?;
        let top: Vec<&str> = result["ranking"].as_array().into_iter().flatten().take(5).filter_map(|w| w["word"].as_str()).collect();
        let found = match result["target_found_at"].as_u64() {
            Some(step) => format!("first asked at step {step}"),
            None => "never asked".into(),
        };
        println!(
            "  cumulative reward {:.2}; target {found}; top words {top:?}",
            result["cumulative_reward"].as_array().and_then(|a| a.last()).and_then(Value::as_f64).unwrap_or(0.0),
        );
    }
    Ok(())
}
