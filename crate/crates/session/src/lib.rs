//! Live teaching sessions over HTTP.
//!
//! A human is shown a target word and answers yes/no questions from a
//! Bayes-UCB bandit learner that ranks words by relevance. The learner
//! either takes the answers at face value (`naive`) or models the human
//! as possibly planning one step ahead (`mixture`).
//!
//! Endpoints (JSON bodies; errors are `{"error": {"code", "message"}}`):
//!
//! | method | path | |
//! |---|---|---|
//! | `GET` | `/datasets` | registered word sets |
//! | `POST` | `/sessions` | `{"dataset", "model", "target"?, "seed"?, "budget"?}` |
//! | `GET` | `/sessions/{id}` | current question and history |
//! | `POST` | `/sessions/{id}/answers` | `{"y": 0 \| 1}` |
//! | `GET` | `/sessions/{id}/result` | rewards and the final ranking |
//!
//! Every session is an append-only JSONL log under `<data_dir>/sessions/`,
//! replayed on startup.

pub mod agents;
pub mod api;
pub mod dataset;
pub mod error;
pub mod session;
pub mod store;

pub use api::{router, serve, AppState, ServiceConfig};
pub use error::ServiceError;
