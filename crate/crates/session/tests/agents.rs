mod common;

use common::*;
use reqwest::Client;
use serde_json::Value;

fn total(result: &Value) -> f64 {
    result["cumulative_reward"].as_array().unwrap().last().unwrap().as_f64().unwrap()
}

/// Step at which the target was first asked about; budget + 1 if never.
fn steps_to_target(result: &Value) -> f64 {
    result["target_found_at"]
        .as_u64()
        .unwrap_or(result["budget"].as_u64().unwrap() + 1) as f64
}

#[tokio::test]
async fn mixture_learner_with_planning_user_beats_naive_pair() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let c = Client::new();
    let ds = server.dataset();
    let (mut naive, mut mixture) = ([0.0; 2], [0.0; 2]);
    for target in 0..ds.len() {
        let seed = 1000 + target as u64;
        let a = play(&c, &server.base, &ds, "naive", Agent::Naive, target, seed).await;
        let b = play(&c, &server.base, &ds, "mixture", Agent::Planner, target, seed).await;
        naive[0] += steps_to_target(&a);
        naive[1] += total(&a);
        mixture[0] += steps_to_target(&b);
        mixture[1] += total(&b);
    }
    let n = ds.len() as f64;
    eprintln!(
        "steps to target: naive {:.2}, mixture {:.2}; cumulative reward: naive {:.3}, mixture {:.3}",
        naive[0] / n,
        mixture[0] / n,
        naive[1] / n,
        mixture[1] / n
    );
    assert!(mixture[0] < naive[0]);
    assert!(mixture[1] > naive[1]);
}

#[tokio::test]
async fn planner_agent_answers_yes_to_the_target_itself() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path()).await;
    let c = Client::new();
    let ds = server.dataset();
    let result = play(&c, &server.base, &ds, "mixture", Agent::Planner, 0, 5).await;
    for e in result["history"].as_array().unwrap() {
        if e["question"]["index"] == 0 {
            assert_eq!(e["y"], 1);
        }
    }
    assert_eq!(result["answered"], 15);
}
