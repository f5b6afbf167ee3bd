#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;

use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::task::JoinHandle;

pub use seqteach_session::agents::Agent;
use seqteach_session::dataset::Dataset;
use seqteach_session::session::SessionView;
use seqteach_session::{router, AppState, ServiceConfig};

pub struct Server {
    pub base: String,
    pub state: AppState,
    handle: JoinHandle<()>,
}

impl Server {
    pub async fn start(data_dir: &Path) -> Self {
        let state = AppState::open(&ServiceConfig {
            data_dir: data_dir.to_path_buf(),
            registry: None,
        })
        .unwrap();
        let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
        let addr = listener.local_addr().unwrap();
        let app = router(state.clone());
        let handle = tokio::spawn(async move {
            axum::serve(listener, app).await.unwrap();
        });
        Self {
            base: format!("http://{addr}"),
            state,
            handle,
        }
    }

    /// Kills the server task without any shutdown handling.
    pub async fn crash(self) {
        self.handle.abort();
        let _ = self.handle.await;
    }

    pub fn dataset(&self) -> Dataset {
        self.state.registry().iter().next().unwrap().clone()
    }
}

pub async fn create(client: &Client, base: &str, body: Value) -> (StatusCode, Value) {
    let r = client.post(format!("{base}/sessions")).json(&body).send().await.unwrap();
    (r.status(), r.json().await.unwrap())
}

pub async fn answer(client: &Client, base: &str, id: &str, y: Value) -> (StatusCode, Value) {
    let r = client
        .post(format!("{base}/sessions/{id}/answers"))
        .json(&json!({ "y": y }))
        .send()
        .await
        .unwrap();
    (r.status(), r.json().await.unwrap())
}

pub async fn get(client: &Client, url: String) -> (StatusCode, Value) {
    let r = client.get(url).send().await.unwrap();
    (r.status(), r.json().await.unwrap())
}

pub async fn view(client: &Client, base: &str, id: &str) -> SessionView {
    let (status, body) = get(client, format!("{base}/sessions/{id}")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    serde_json::from_value(body).unwrap()
}

/// Runs a whole session through the HTTP API and returns its result body.
pub async fn play(client: &Client, base: &str, ds: &Dataset, model: &str, agent: Agent, target: usize, seed: u64) -> Value {
    let mut rng = seqteach::rng::stream(seed, &[77]);
    let (status, created) = create(
        client,
        base,
        json!({"dataset": ds.id, "model": model, "target": target, "seed": seed}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["id"].as_str().unwrap().to_string();
    loop {
        let v = view(client, base, &id).await;
        if v.question.is_none() {
            break;
        }
        let y = agent.respond(ds, &v, &mut rng).unwrap();
        let (status, body) = answer(client, base, &id, json!(y)).await;
        assert_eq!(status, StatusCode::OK, "{body}");
    }
    let (status, result) = get(client, format!("{base}/sessions/{id}/result")).await;
    assert_eq!(status, StatusCode::OK);
    result
}
